"""Hierarchical RLGC netlist construction.

Node 0 is ground. Grid nodes are labelled ``(layer, row, col)`` where the
layer is ``"intp"`` for the interposer or the chiplet name; the ideal supply
node is labelled ``("supply",)``.

Branch kinds and their ``value`` tuples:

=====  ===============  =====================================
kind   value            meaning
=====  ===============  =====================================
R      (R,)             resistor
L      (L,)             inductor
C      (C,)             capacitor
G      (C, tan_delta)   dielectric loss, G(f) = 2*pi*f*C*tan_delta
RL     (R, L)           series R-L
RC     (R, C)           series ESR-C (decap)
V      (E,)             ideal DC source, a is the + terminal
=====  ===============  =====================================
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import InvalidFloorplanError, LayoutViolationError
from .floorplan import DecapLayout, Floorplan
from .params import MIM_STEP, MOS_STEP, PdnParams

INTERPOSER = "intp"
SUPPLY = ("supply",)
BRANCH_KINDS = ("R", "L", "C", "G", "RL", "RC", "V")


@dataclass(frozen=True)
class Branch:
    kind: str
    a: int
    b: int
    value: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in BRANCH_KINDS:
            raise ValueError(f"unknown branch kind {self.kind!r}")


@dataclass(frozen=True)
class Netlist:
    n_nodes: int
    branches: tuple[Branch, ...]
    ports: tuple[tuple[int, int], ...] = ()
    labels: dict[tuple, int] = field(default_factory=dict)
    port_names: tuple[str, ...] = ()
    floorplan: Floorplan | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        for br in self.branches:
            if not (0 <= br.a < self.n_nodes and 0 <= br.b < self.n_nodes):
                raise ValueError(f"branch {br} references a node outside 0..{self.n_nodes - 1}")

    def node_label(self) -> dict[int, tuple]:
        return {v: k for k, v in self.labels.items()}

    def count(self, kind: str) -> int:
        return sum(1 for br in self.branches if br.kind == kind)

    def branch_multiset(self) -> Counter:
        return Counter(self.branches)

    def layer_nodes(self, layer: str) -> list[tuple[tuple, int]]:
        """(label, node) pairs of one grid layer in row-major order."""
        items = [(k, v) for k, v in self.labels.items() if k[0] == layer]
        return sorted(items, key=lambda kv: kv[0][1:])

    def with_branches(self, extra: list[Branch]) -> Netlist:
        return replace(self, branches=self.branches + tuple(extra))

    def listing(self) -> str:
        lines = [f"* nodes {self.n_nodes} branches {len(self.branches)}"]
        for br in self.branches:
            vals = " ".join(f"{v:.6g}" for v in br.value)
            lines.append(f"{br.kind} {br.a} {br.b} {vals}")
        for (node, ref), name in zip(self.ports, self.port_names or [""] * len(self.ports)):
            lines.append(f"P {node} {ref} {name}".rstrip())
        return "\n".join(lines) + "\n"

    def write_listing(self, path: str | Path) -> None:
        Path(path).write_text(self.listing())


def _layer_values(layer: str, params: PdnParams) -> tuple[float, float, float]:
    if layer == "chip":
        return params.r_chip, params.l_chip, params.c_chip
    if layer == "interposer":
        return params.r_intp, params.l_intp, params.c_intp
    raise ValueError(f"layer must be 'chip' or 'interposer', got {layer!r}")


def _grid_branches(rows, cols, first_node, r, l, c, tand):
    def node(i, j):
        return first_node + i * cols + j

    out = []
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                out.append(Branch("RL", node(i, j), node(i, j + 1), (r, l)))
            if i + 1 < rows:
                out.append(Branch("RL", node(i, j), node(i + 1, j), (r, l)))
    for i in range(rows):
        for j in range(cols):
            out.append(Branch("C", node(i, j), 0, (c,)))
            out.append(Branch("G", node(i, j), 0, (c, tand)))
    return out


def build_unit_cell_grid(dims: tuple[int, int], layer: str, params: PdnParams) -> Netlist:
    """Rectangular grid of unit cells: series R-L links plus shunt C and G(f) per node."""
    rows, cols = dims
    if rows < 1 or cols < 1:
        raise InvalidFloorplanError(f"grid dims must be >= 1, got {dims}")
    r, l, c = _layer_values(layer, params)
    branches = _grid_branches(rows, cols, 1, r, l, c, params.loss_tangent)
    tag = "chip" if layer == "chip" else INTERPOSER
    labels = {(tag, i, j): 1 + i * cols + j for i in range(rows) for j in range(cols)}
    return Netlist(rows * cols + 1, tuple(branches), labels=labels)


def assemble_hierarchy(floorplan: Floorplan, params: PdnParams) -> Netlist:
    """Cascade interposer grid, chiplet grids, micro-bumps, TSVs and the supply."""
    if not floorplan.tsv_sites:
        raise InvalidFloorplanError("floorplan has no TSV sites; the PDN would float")
    branches: list[Branch] = []
    labels: dict[tuple, int] = {}
    next_node = 1

    rows, cols = floorplan.interposer_dims
    branches += _grid_branches(
        rows, cols, next_node, params.r_intp, params.l_intp, params.c_intp, params.loss_tangent
    )
    for i in range(rows):
        for j in range(cols):
            labels[(INTERPOSER, i, j)] = next_node + i * cols + j
    next_node += rows * cols

    nb = params.ubump_parallel
    for chip in floorplan.chiplets:
        cr, cc = chip.dims
        branches += _grid_branches(
            cr, cc, next_node, params.r_chip, params.l_chip, params.c_chip, params.loss_tangent
        )
        r0, c0 = chip.origin
        for i in range(cr):
            for j in range(cc):
                node = next_node + i * cc + j
                labels[(chip.name, i, j)] = node
                below = labels[(INTERPOSER, r0 + i, c0 + j)]
                branches.append(Branch("RL", node, below, (params.r_ubump / nb, params.l_ubump / nb)))
        next_node += cr * cc

    supply = next_node
    labels[SUPPLY] = supply
    next_node += 1
    nt = params.tsv_parallel
    for r, c in floorplan.tsv_sites:
        node = labels[(INTERPOSER, r, c)]
        branches.append(Branch("C", node, 0, (params.c_tsv * nt,)))
        branches.append(
            Branch(
                "RL",
                node,
                supply,
                ((params.r_tsv + params.r_bump) / nt, (params.l_tsv + params.l_bump) / nt),
            )
        )
    branches.append(Branch("V", supply, 0, (params.vdd,)))

    ports = tuple((labels[(p.chiplet, p.row, p.col)], 0) for p in floorplan.probe_ports)
    names = tuple(p.label for p in floorplan.probe_ports)
    return Netlist(next_node, tuple(branches), ports, labels, names, floorplan)


def decap_branches(netlist: Netlist, layout: DecapLayout, params: PdnParams) -> list[Branch]:
    out = []
    for (r, c), level in _nonzero(layout.mim):
        node = _lookup(netlist, (INTERPOSER, r, c))
        cap = level * MIM_STEP
        out.append(Branch("RC", node, 0, (params.mim_esr(cap), cap)))
    for name in sorted(layout.mos):
        for (r, c), level in _nonzero(layout.mos[name]):
            node = _lookup(netlist, (name, r, c))
            cap = level * MOS_STEP
            out.append(Branch("RC", node, 0, (params.mos_esr(cap), cap)))
    return out


def apply_decaps(netlist: Netlist, layout: DecapLayout, params: PdnParams) -> Netlist:
    """Attach one series ESR-C branch to ground per nonzero UDC level."""
    if netlist.floorplan is not None:
        layout.validate(netlist.floorplan)
    return netlist.with_branches(decap_branches(netlist, layout, params))


def _nonzero(levels):
    rows, cols = levels.shape
    for r in range(rows):
        for c in range(cols):
            if levels[r, c]:
                yield (r, c), int(levels[r, c])


def _lookup(netlist: Netlist, label: tuple) -> int:
    try:
        return netlist.labels[label]
    except KeyError:
        raise LayoutViolationError(f"layout references UDC {label} absent from the netlist") from None
