"""Cached evaluators shared by the RL environments and the baseline optimizers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .currents import CurrentConfig, CurrentProfile, gen_profile
from .floorplan import DecapLayout, Floorplan
from .freq import RewardWeights, TargetImpedanceSpec, mask_violation, reward_from_excess
from .mna import AcSolution, AcSweep, default_frequencies
from .netlist import Netlist, apply_decaps, assemble_hierarchy, decap_branches
from .params import PdnParams
from .transient import DEFAULT_DT, DEFAULT_T_END, transient_solve
from .vvi import VviReport, VviSpec, vvi_report


@dataclass
class FreqProblem:
    """Frequency-phase objective: port impedance against the target mask."""

    floorplan: Floorplan
    params: PdnParams
    target: TargetImpedanceSpec
    weights: RewardWeights = field(default_factory=RewardWeights)
    frequencies: np.ndarray | None = None

    def __post_init__(self):
        if self.frequencies is None:
            self.frequencies = default_frequencies()
        self.netlist: Netlist = assemble_hierarchy(self.floorplan, self.params)
        self._sweep = AcSweep(self.netlist, self.frequencies)
        self.evaluations = 0

    def impedance(self, layout: DecapLayout) -> AcSolution:
        layout.validate(self.floorplan)
        shunts = [(b.a, *b.value) for b in decap_branches(self.netlist, layout, self.params)]
        return self._sweep.impedance(shunts)

    def excess(self, layout: DecapLayout) -> np.ndarray:
        return mask_violation(self.impedance(layout), self.target)

    def evaluate(self, layout: DecapLayout) -> tuple[float, bool]:
        """(reward, compliant) for one layout."""
        self.evaluations += 1
        ex = self.excess(layout)
        return reward_from_excess(ex, layout, self.weights, self.floorplan), bool((ex <= 0).all())


def chip_nodes(netlist: Netlist, floorplan: Floorplan, chip_name: str) -> list[int]:
    chip = floorplan.chiplet(chip_name)
    return [netlist.labels[(chip.name, i, j)] for i in range(chip.dims[0]) for j in range(chip.dims[1])]


def make_profiles(netlist: Netlist, floorplan: Floorplan, rho: float, i_ref: float, seed: int,
                  cfg: CurrentConfig | None = None) -> list[CurrentProfile]:
    """One profile per chiplet: internal loads on every node, I/O loads at its io sites."""
    out = []
    for k, chip in enumerate(floorplan.chiplets):
        internal = chip_nodes(netlist, floorplan, chip.name)
        io = [netlist.labels[(chip.name, r, c)] for r, c in chip.io_sites]
        out.append(gen_profile(internal, io, rho, i_ref, seed * 1000 + k, cfg, chip.name))
    return out


def monitored_nodes(netlist: Netlist, floorplan: Floorplan) -> list[int]:
    nodes = []
    for chip in floorplan.chiplets:
        nodes += chip_nodes(netlist, floorplan, chip.name)
    return nodes


@dataclass
class TimeProblem:
    """Time-phase objective: mean per-node VVI over a frozen set of load profiles."""

    floorplan: Floorplan
    params: PdnParams
    vvi_spec: VviSpec
    profile_sets: list[list[CurrentProfile]]
    dt: float = DEFAULT_DT
    t_end: float = DEFAULT_T_END
    loss_frequency: float = 3.4e9

    def __post_init__(self):
        if not self.profile_sets:
            raise ValueError("need at least one current profile set")
        self.netlist: Netlist = assemble_hierarchy(self.floorplan, self.params)
        self.monitored = monitored_nodes(self.netlist, self.floorplan)
        self.evaluations = 0

    def report(self, layout: DecapLayout) -> VviReport:
        self.evaluations += 1
        net = apply_decaps(self.netlist, layout, self.params)
        per_node = None
        labels = ()
        for profiles in self.profile_sets:
            sources = [s for p in profiles for s in p.sources]
            sol = transient_solve(net, sources, self.dt, self.t_end, self.monitored,
                                  loss_frequency=self.loss_frequency)
            rep = vvi_report(sol, self.vvi_spec)
            labels = rep.labels
            per_node = rep.per_node if per_node is None else per_node + rep.per_node
        return VviReport(labels, per_node / len(self.profile_sets))

    def vvi_grid(self, report: VviReport) -> np.ndarray:
        """Per-node VVI placed on the interposer canvas at each chiplet's offset."""
        grid = np.zeros(self.floorplan.interposer_dims)
        k = 0
        for chip in self.floorplan.chiplets:
            r0, c0 = chip.origin
            for i in range(chip.dims[0]):
                for j in range(chip.dims[1]):
                    grid[r0 + i, c0 + j] = report.per_node[k]
                    k += 1
        return grid
