"""Fixed-step trapezoidal transient analysis with PWL current loads.

Every reactive branch is replaced by its trapezoidal companion model, a
conductance ``g`` in parallel with a history current ``J``:

    i[n+1] = g * v[n+1] + J,   J = a*v[n] + b*i[n] + c*s[n]

where ``s`` is the internal capacitor voltage of a series ESR-C branch.
The companion matrix depends only on ``dt``, so it is factorized once and
reused at every step. Dielectric loss conductances are frozen at a single
frequency (the knee frequency of the case).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .errors import DivergenceError, SingularSystemError
from .mna import LinearSystem, check_connectivity
from .netlist import Netlist

DEFAULT_DT = 1e-12
DEFAULT_T_END = 2e-9
DEFAULT_LOSS_FREQUENCY = 3.4e9
CONDUCTIVE = ("R", "G", "L", "RL", "V")


@dataclass(frozen=True)
class PwlSource:
    """Piecewise-linear current drawn from ``node`` to ground (negative = injected)."""

    node: int
    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise ValueError("PWL source needs matching, nonempty time and value lists")
        if any(t1 <= t0 for t0, t1 in zip(self.times, self.times[1:])):
            raise ValueError("PWL breakpoints must be strictly increasing in time")

    @classmethod
    def from_arrays(cls, node: int, times, values) -> PwlSource:
        return cls(int(node), tuple(float(t) for t in times), tuple(float(v) for v in values))

    def sample(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.values)

    def integral(self) -> float:
        t = np.asarray(self.times)
        v = np.asarray(self.values)
        return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(t)))


def eval_pwl(source: PwlSource, t: float) -> float:
    """Linear interpolation between breakpoints, clamped outside the range."""
    return float(np.interp(t, source.times, source.values))


@dataclass
class TransientSolution:
    times: np.ndarray
    nodes: tuple[int, ...]
    labels: tuple[str, ...]
    voltages: np.ndarray  # (n_samples, n_monitored)

    def trace(self, node: int) -> np.ndarray:
        return self.voltages[:, self.nodes.index(node)]

    def to_csv(self, path) -> None:
        from .io import write_transient_csv

        write_transient_csv(path, self)


@dataclass
class CompanionSystem:
    system: LinearSystem
    branch_index: np.ndarray
    br_a: np.ndarray
    br_b: np.ndarray
    g: np.ndarray
    ca: np.ndarray
    cb: np.ndarray
    cc: np.ndarray
    cd: np.ndarray


def _v_aux(netlist: Netlist) -> dict[int, int]:
    n = netlist.n_nodes - 1
    aux = {}
    for idx, br in enumerate(netlist.branches):
        if br.kind == "V":
            aux[idx] = n + len(aux)
    return aux


def _coo_add(rows, cols, vals, i, j, y):
    for r, c, v in ((i, i, y), (j, j, y), (i, j, -y), (j, i, -y)):
        if r >= 0 and c >= 0:
            rows.append(r)
            cols.append(c)
            vals.append(v)


def companion_system(netlist: Netlist, dt: float, loss_frequency: float,
                     method: str = "trap") -> CompanionSystem:
    """Companion matrix and history coefficients for one step size.

    ``method="be"`` gives backward-Euler companions (used for the start-up
    step); there the RC state update is ``s += cd * i_new``.
    """
    if method not in ("trap", "be"):
        raise ValueError(method)
    be = method == "be"
    if dt <= 0:
        raise ValueError("dt must be > 0")
    check_connectivity(netlist, CONDUCTIVE)
    aux = _v_aux(netlist)
    dim = netlist.n_nodes - 1 + len(aux)
    rows, cols, vals = [], [], []
    rhs = np.zeros(dim)
    w_loss = 2 * math.pi * loss_frequency
    dyn = []
    coeffs = []
    for idx, br in enumerate(netlist.branches):
        i, j = br.a - 1, br.b - 1
        k = br.kind
        if k == "R":
            _coo_add(rows, cols, vals, i, j, 1.0 / br.value[0])
        elif k == "G":
            _coo_add(rows, cols, vals, i, j, w_loss * br.value[0] * br.value[1])
        elif k == "V":
            m = aux[idx]
            for r, c, v in ((i, m, 1.0), (j, m, -1.0), (m, i, 1.0), (m, j, -1.0)):
                if r >= 0 and c >= 0:
                    rows.append(r)
                    cols.append(c)
                    vals.append(v)
            rhs[m] = br.value[0]
        else:
            if k == "C":
                if be:
                    g = br.value[0] / dt
                    co = (g, -g, 0.0, 0.0, 0.0)
                else:
                    g = 2 * br.value[0] / dt
                    co = (g, -g, -1.0, 0.0, 0.0)
            elif k == "L":
                if be:
                    g = dt / br.value[0]
                    co = (g, 0.0, 1.0, 0.0, 0.0)
                else:
                    g = dt / (2 * br.value[0])
                    co = (g, g, 1.0, 0.0, 0.0)
            elif k == "RL":
                r, l = br.value
                if be:
                    g = 1.0 / (r + l / dt)
                    co = (g, 0.0, g * l / dt, 0.0, 0.0)
                else:
                    g = 1.0 / (r + 2 * l / dt)
                    co = (g, g, g * (2 * l / dt - r), 0.0, 0.0)
            elif k == "RC":
                r, c = br.value
                h = dt / c if be else dt / (2 * c)
                g = 1.0 / (r + h)
                co = (g, 0.0, 0.0 if be else -g * h, -g, h)
            else:
                raise ValueError(f"unsupported branch kind {k!r}")
            _coo_add(rows, cols, vals, i, j, g)
            dyn.append((idx, i, j))
            coeffs.append(co)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsc()
    mat.sum_duplicates()
    co = np.array(coeffs, dtype=float).reshape(-1, 5)
    d = np.array(dyn, dtype=np.int64).reshape(-1, 3)
    return CompanionSystem(
        LinearSystem(mat, rhs, netlist.n_nodes - 1, aux),
        d[:, 0], d[:, 1], d[:, 2], *(np.ascontiguousarray(co[:, q]) for q in range(5))
    )


def dc_operating_point(netlist: Netlist, loss_frequency: float) -> tuple[np.ndarray, dict[int, float]]:
    """Quiescent state with every current source off.

    Returns node voltages indexed by node id (ground = 0) and the DC current
    of every L/RL branch keyed by branch index. Capacitive branches are open;
    dielectric conductances use the same frozen value as the transient run.
    """
    check_connectivity(netlist, CONDUCTIVE)
    n = netlist.n_nodes - 1
    aux = {}
    for idx, br in enumerate(netlist.branches):
        if br.kind in ("L", "RL", "V"):
            aux[idx] = n + len(aux)
    dim = n + len(aux)
    rows, cols, vals = [], [], []
    rhs = np.zeros(dim)
    w_loss = 2 * math.pi * loss_frequency
    for idx, br in enumerate(netlist.branches):
        i, j = br.a - 1, br.b - 1
        if br.kind == "R":
            _coo_add(rows, cols, vals, i, j, 1.0 / br.value[0])
        elif br.kind == "G":
            _coo_add(rows, cols, vals, i, j, w_loss * br.value[0] * br.value[1])
        elif idx in aux:
            m = aux[idx]
            for r, c, v in ((i, m, 1.0), (j, m, -1.0), (m, i, 1.0), (m, j, -1.0)):
                if r >= 0 and c >= 0:
                    rows.append(r)
                    cols.append(c)
                    vals.append(v)
            if br.kind == "RL":
                rows.append(m)
                cols.append(m)
                vals.append(-br.value[0])
            elif br.kind == "V":
                rhs[m] = br.value[0]
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsc()
    try:
        x = splu(mat).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular DC system: {exc}") from None
    volts = np.concatenate([[0.0], x[:n]])
    currents = {idx: float(x[m]) for idx, m in aux.items() if netlist.branches[idx].kind != "V"}
    return volts, currents


def time_grid(dt: float, t_end: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if t_end < dt:
        raise ValueError("t_end must be >= dt")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * t_end:
        raise ValueError(f"t_end={t_end} is not an integer multiple of dt={dt}")
    return np.arange(n + 1) * dt


def transient_solve(
    netlist: Netlist,
    sources: list[PwlSource],
    dt: float = DEFAULT_DT,
    t_end: float = DEFAULT_T_END,
    monitored: list[int] | None = None,
    loss_frequency: float = DEFAULT_LOSS_FREQUENCY,
    backend: str | None = None,
) -> TransientSolution:
    """Integrate from the quiescent operating point over ``[0, t_end]``."""
    times = time_grid(dt, t_end)
    comp = companion_system(netlist, dt, loss_frequency)
    volts, dc_currents = dc_operating_point(netlist, loss_frequency)
    sysm = comp.system
    n_unk = sysm.matrix.shape[0]
    try:
        lu = splu(sysm.matrix)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular companion matrix: {exc}") from None

    # initial unknowns: node voltages; V-source aux currents are recomputed each step
    x0 = np.zeros(n_unk)
    x0[: netlist.n_nodes - 1] = volts[1:]
    va = np.where(comp.br_a >= 0, volts[comp.br_a + 1], 0.0)
    vb = np.where(comp.br_b >= 0, volts[comp.br_b + 1], 0.0)
    v0 = va - vb
    kinds = [netlist.branches[k].kind for k in comp.branch_index]
    i_state = np.array([dc_currents.get(int(k), 0.0) for k in comp.branch_index], dtype=float)
    s_state = np.where(np.array(kinds) == "RC", v0, 0.0).astype(float) if kinds else np.zeros(0)

    if monitored is None:
        monitored = list(range(1, netlist.n_nodes))
    for node in monitored:
        if not 0 < node < netlist.n_nodes:
            raise ValueError(f"cannot monitor node {node}")
    for src in sources:
        if not 0 < src.node < netlist.n_nodes:
            raise ValueError(f"source attached to invalid node {src.node}")
    src_unknown = np.array([s.node - 1 for s in sources], dtype=np.int64)
    src_values = np.empty((len(times), len(sources)))
    for k, s in enumerate(sources):
        src_values[:, k] = s.sample(times)
    mon = np.array([m - 1 for m in monitored], dtype=np.int64)
    out = np.empty((len(times), len(mon)))
    out[0] = x0[mon]
    s_state = np.ascontiguousarray(s_state)

    # backward-Euler start-up step: tolerates loads that switch on at t = 0
    x1 = _be_step(netlist, dt, loss_frequency, x0, i_state, s_state, src_unknown, src_values[1])
    if not np.isfinite(x1).all():
        raise DivergenceError("non-finite solution at step 1", step=1)
    bad = kernels.march(
        lu, comp.br_a, comp.br_b, comp.g, comp.ca, comp.cb, comp.cc, comp.cd,
        i_state, s_state, x1, sysm.rhs, src_unknown, src_values[1:], mon, out[1:],
        backend=backend,
    )
    if bad >= 0:
        bad += 1
        raise DivergenceError(f"non-finite solution at step {bad} (t = {bad * dt:.6g} s)", step=bad)
    inv = netlist.node_label()
    labels = tuple(_fmt_label(inv.get(m, m)) for m in monitored)
    return TransientSolution(times, tuple(monitored), labels, out)


def _be_step(netlist, dt, loss_frequency, x0, i_state, s_state, src_unknown, src_now):
    """One backward-Euler step from ``x0``; updates branch states in place."""
    be = companion_system(netlist, dt, loss_frequency, method="be")
    va = np.where(be.br_a >= 0, x0[be.br_a], 0.0)
    vb = np.where(be.br_b >= 0, x0[be.br_b], 0.0)
    j = be.ca * (va - vb) + be.cb * i_state + be.cc * s_state
    rhs = be.system.rhs.copy()
    np.subtract.at(rhs, be.br_a[be.br_a >= 0], j[be.br_a >= 0])
    np.add.at(rhs, be.br_b[be.br_b >= 0], j[be.br_b >= 0])
    np.subtract.at(rhs, src_unknown, src_now)
    try:
        x1 = splu(be.system.matrix).solve(rhs)
    except RuntimeError as exc:
        raise SingularSystemError(f"singular companion matrix: {exc}") from None
    va = np.where(be.br_a >= 0, x1[be.br_a], 0.0)
    vb = np.where(be.br_b >= 0, x1[be.br_b], 0.0)
    i_new = be.g * (va - vb) + j
    s_state += be.cd * i_new
    i_state[:] = i_new
    return x1


def _fmt_label(label) -> str:
    if isinstance(label, tuple):
        return "_".join(str(p) for p in label)
    return f"n{label}"
