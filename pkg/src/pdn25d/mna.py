"""Modified nodal analysis: AC assembly, port impedance sweeps, DC solve.

Unknown ordering: node voltages for nodes 1..n-1 (ground removed), then one
auxiliary current per L, RL and V branch in netlist order. Auxiliary
currents flow from terminal ``a`` to ``b`` through the branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .errors import PdnError, SingularSystemError
from .netlist import Netlist

AUX_KINDS = ("L", "RL", "V")
DENSE_MAX = 160  # systems up to this dimension are solved as one batched dense stack


@dataclass
class LinearSystem:
    matrix: sp.csc_matrix
    rhs: np.ndarray
    n_node_unknowns: int
    aux_of_branch: dict[int, int]


@dataclass
class AcSolution:
    frequencies: np.ndarray
    port_names: tuple[str, ...]
    z_matrix: np.ndarray  # (n_freq, n_ports, n_ports); [:, i, j] = V_i per 1 A into port j

    @property
    def z(self) -> np.ndarray:
        """Self impedance per port, shape (n_freq, n_ports)."""
        return np.diagonal(self.z_matrix, axis1=1, axis2=2).copy()

    def to_csv(self, path, target=None) -> None:
        from .io import write_impedance_csv

        write_impedance_csv(path, self, target)


def _aux_branches(netlist: Netlist) -> dict[int, int]:
    n = netlist.n_nodes - 1
    aux = {}
    for idx, br in enumerate(netlist.branches):
        if br.kind in AUX_KINDS:
            aux[idx] = n + len(aux)
    return aux


def check_connectivity(netlist: Netlist, kinds: tuple[str, ...] | None = None) -> None:
    """Raise SingularSystemError naming a node with no path to ground."""
    if netlist.n_nodes < 2 or not netlist.branches:
        raise SingularSystemError("empty netlist")
    a = [br.a for br in netlist.branches if kinds is None or br.kind in kinds]
    b = [br.b for br in netlist.branches if kinds is None or br.kind in kinds]
    graph = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(netlist.n_nodes,) * 2)
    _, comp = connected_components(graph, directed=False)
    floating = np.flatnonzero(comp != comp[0])
    if len(floating):
        node = int(floating[0])
        label = netlist.node_label().get(node, node)
        raise SingularSystemError(f"node {node} {label} has no path to ground", node=node)


class _Entries:
    """COO stamps whose values are affine in (1, j*w, w) plus series-RC admittances."""

    def __init__(self):
        self.rows, self.cols = [], []
        self.const, self.jw, self.w = [], [], []
        self.rc_r, self.rc_c = [], []

    def add(self, r, c, const=0.0, jw=0.0, w=0.0, rc=None):
        if r < 0 or c < 0:
            return
        self.rows.append(r)
        self.cols.append(c)
        self.const.append(const)
        self.jw.append(jw)
        self.w.append(w)
        # rc = (sign, R, C)
        self.rc_r.append(rc[1] if rc else 0.0)
        self.rc_c.append(rc[0] * rc[2] if rc else 0.0)

    def arrays(self):
        return {k: np.asarray(v, dtype=float if k not in ("rows", "cols") else np.int64)
                for k, v in vars(self).items()}


def _stamp_admittance(e: _Entries, a: int, b: int, **kw):
    # ground (node 0) maps to index -1 and is skipped by _Entries.add
    i, j = a - 1, b - 1
    neg = {k: (-v if k != "rc" else (-v[0], v[1], v[2])) for k, v in kw.items()}
    e.add(i, i, **kw)
    e.add(j, j, **kw)
    e.add(i, j, **neg)
    e.add(j, i, **neg)


def _build_entries(netlist: Netlist, aux: dict[int, int]) -> tuple[_Entries, np.ndarray]:
    e = _Entries()
    dim = netlist.n_nodes - 1 + len(aux)
    rhs = np.zeros(dim)
    for idx, br in enumerate(netlist.branches):
        k = br.kind
        if k == "R":
            _stamp_admittance(e, br.a, br.b, const=1.0 / br.value[0])
        elif k == "C":
            _stamp_admittance(e, br.a, br.b, jw=br.value[0])
        elif k == "G":
            c, tand = br.value
            _stamp_admittance(e, br.a, br.b, w=c * tand)
        elif k == "RC":
            r, c = br.value
            _stamp_admittance(e, br.a, br.b, rc=(1.0, r, c))
        else:
            m = aux[idx]
            i, j = br.a - 1, br.b - 1
            e.add(i, m, const=1.0)
            e.add(j, m, const=-1.0)
            e.add(m, i, const=1.0)
            e.add(m, j, const=-1.0)
            if k == "L":
                e.add(m, m, jw=-br.value[0])
            elif k == "RL":
                e.add(m, m, const=-br.value[0], jw=-br.value[1])
            else:
                rhs[m] = br.value[0]
    # explicit diagonal for every node unknown so shunt updates never change the pattern
    for i in range(netlist.n_nodes - 1):
        e.add(i, i)
    return e, rhs


def _entry_values(arr: dict, omega: np.ndarray) -> np.ndarray:
    w = omega[:, None]
    vals = arr["const"][None, :] + 1j * w * arr["jw"][None, :] + w * arr["w"][None, :]
    rc = arr["rc_c"] != 0
    if rc.any():
        c = arr["rc_c"][rc]
        r = arr["rc_r"][rc]
        # sign is folded into c; the RC time constant uses |c|
        vals[:, rc] += 1j * w * c / (1.0 + 1j * w * r * np.abs(c))
    return vals


def rc_admittance(r: float, c: float, omega: np.ndarray) -> np.ndarray:
    return 1j * omega * c / (1.0 + 1j * omega * r * c)


def mna_assemble(netlist: Netlist, frequency: float | None, dt: float | None = None,
                 loss_frequency: float | None = None) -> LinearSystem:
    """Assemble the MNA system for one frequency, DC (``frequency=0``) or transient.

    With ``frequency=None`` the real trapezoidal companion system for step
    ``dt`` is returned; dielectric conductances are evaluated at
    ``loss_frequency``.
    """
    if netlist.n_nodes < 2 or not netlist.branches:
        raise SingularSystemError("empty netlist")
    if frequency is None:
        from .transient import companion_system

        if dt is None or loss_frequency is None:
            raise ValueError("transient assembly needs dt and loss_frequency")
        return companion_system(netlist, dt, loss_frequency).system
    aux = _aux_branches(netlist)
    e, rhs = _build_entries(netlist, aux)
    arr = e.arrays()
    dim = len(rhs)
    vals = _entry_values(arr, np.array([2 * math.pi * frequency]))[0]
    if frequency > 0:
        rhs = np.zeros(dim)
    else:
        vals = vals.real
    mat = sp.coo_matrix((vals, (arr["rows"], arr["cols"])), shape=(dim, dim)).tocsc()
    mat.sum_duplicates()
    return LinearSystem(mat, rhs, netlist.n_nodes - 1, aux)


class AcSweep:
    """Port impedance over a frequency list on a fixed sparsity pattern.

    The fill-reducing column ordering is computed once and reused for the
    numeric factorization at every frequency. Extra series-RC shunts
    (decaps) can be added per call without changing the pattern.
    """

    def __init__(self, netlist: Netlist, frequencies, ports=None, port_names=None):
        freqs = np.asarray(frequencies, dtype=float)
        if freqs.ndim != 1 or len(freqs) == 0 or (freqs <= 0).any():
            raise ValueError("frequencies must be a nonempty list of positive values")
        check_connectivity(netlist)
        ports = list(netlist.ports if ports is None else ports)
        if not ports:
            raise PdnError("no ports to probe")
        for node, ref in ports:
            if not (0 < node < netlist.n_nodes and 0 <= ref < netlist.n_nodes and node != ref):
                raise PdnError(f"invalid port ({node}, {ref})")
        self.netlist = netlist
        self.frequencies = freqs
        self.omega = 2 * math.pi * freqs
        self.ports = ports
        if port_names is None:
            port_names = netlist.port_names if len(netlist.port_names) == len(ports) else None
        self.port_names = tuple(port_names or (f"n{node}" for node, _ in ports))

        aux = _aux_branches(netlist)
        e, _ = _build_entries(netlist, aux)
        arr = e.arrays()
        self.dim = dim = netlist.n_nodes - 1 + len(aux)
        rows, cols = arr["rows"], arr["cols"]
        coo_vals = _entry_values(arr, self.omega)

        # column ordering from one representative frequency
        mid = len(freqs) // 2
        probe = sp.coo_matrix((coo_vals[mid], (rows, cols)), shape=(dim, dim)).tocsc()
        try:
            self.perm_c = splu(probe, permc_spec="COLAMD").perm_c
        except RuntimeError as exc:
            raise SingularSystemError(f"singular MNA matrix: {exc}", frequency=freqs[mid]) from None
        newcol = self.perm_c[cols]
        key = newcol * dim + rows
        uniq, inverse = np.unique(key, return_inverse=True)
        self._indices = (uniq % dim).astype(np.int32)
        counts = np.bincount(uniq // dim, minlength=dim)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        scatter = sp.csr_matrix(
            (np.ones(len(key)), (np.arange(len(key)), inverse)), shape=(len(key), len(uniq))
        )
        self._data = np.asarray((scatter.T @ coo_vals.T).T)
        self._dense_pos = (self._indices.astype(np.int64) * dim
                           + np.repeat(np.arange(dim), counts)) if dim <= DENSE_MAX else None
        diag_key = self.perm_c[np.arange(dim)] * dim + np.arange(dim)
        self._diag_pos = np.searchsorted(uniq, diag_key)

        self._rhs = np.zeros((dim, len(ports)), dtype=complex)
        for p, (node, ref) in enumerate(ports):
            self._rhs[node - 1, p] += 1.0
            if ref > 0:
                self._rhs[ref - 1, p] -= 1.0
        self._ports = ports

    def shunt_data(self, shunts) -> np.ndarray:
        """Matrix data with extra ``(node, R, C)`` series-RC branches to ground."""
        data = self._data
        if shunts:
            data = data.copy()
            for node, r, c in shunts:
                data[:, self._diag_pos[node - 1]] += rc_admittance(r, c, self.omega)
        return data

    def solve_frequency(self, k: int, data: np.ndarray | None = None) -> np.ndarray:
        """Port impedance matrix at frequency index ``k``."""
        data = self._data if data is None else data
        mat = sp.csc_matrix((data[k], self._indices, self._indptr), shape=(self.dim, self.dim))
        try:
            lu = splu(mat, permc_spec="NATURAL")
        except RuntimeError as exc:
            raise SingularSystemError(
                f"singular MNA matrix at {self.frequencies[k]:.6g} Hz: {exc}",
                frequency=self.frequencies[k],
            ) from None
        y = lu.solve(self._rhs)
        x = y[self.perm_c]
        out = np.empty((len(self._ports), len(self._ports)), dtype=complex)
        for i, (node, ref) in enumerate(self._ports):
            out[i] = x[node - 1] - (x[ref - 1] if ref > 0 else 0.0)
        return out

    def _solve_dense(self, data: np.ndarray) -> np.ndarray:
        n_f, dim = len(self.frequencies), self.dim
        dense = np.zeros((n_f, dim * dim), dtype=complex)
        dense[:, self._dense_pos] = data
        try:
            y = np.linalg.solve(dense.reshape(n_f, dim, dim), self._rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"singular MNA matrix in sweep: {exc}") from None
        x = y[:, self.perm_c, :]
        z = np.empty((n_f, len(self._ports), len(self._ports)), dtype=complex)
        for i, (node, ref) in enumerate(self._ports):
            z[:, i] = x[:, node - 1] - (x[:, ref - 1] if ref > 0 else 0.0)
        return z

    def impedance(self, shunts=None, dense: bool | None = None) -> AcSolution:
        data = self.shunt_data(shunts)
        if dense is None:
            dense = self._dense_pos is not None
        if dense and self._dense_pos is not None:
            z = self._solve_dense(data)
        else:
            z = np.stack([self.solve_frequency(k, data) for k in range(len(self.frequencies))])
        return AcSolution(self.frequencies, self.port_names, z)


def ac_port_impedance(netlist: Netlist, ports=None, frequencies=None) -> AcSolution:
    """Inject 1 A at each port in turn; Z is the resulting port voltage."""
    if frequencies is None:
        frequencies = default_frequencies()
    return AcSweep(netlist, frequencies, ports).impedance()


def default_frequencies(f_start: float = 0.1e9, f_stop: float = 20e9, per_decade: int = 100):
    """Logarithmic sweep with ``per_decade`` points per decade, both ends included."""
    decades = math.log10(f_stop / f_start)
    n = int(round(decades * per_decade)) + 1
    return np.logspace(math.log10(f_start), math.log10(f_stop), n)
