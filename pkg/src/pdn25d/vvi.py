"""Voltage violation integral and the time-phase reward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PreconditionError
from .floorplan import DecapLayout, Floorplan
from .transient import TransientSolution


@dataclass(frozen=True)
class VviSpec:
    v_min: float
    v_max: float
    window: float
    vdd: float | None = None

    def __post_init__(self):
        if self.vdd is not None and not self.v_min < self.vdd < self.v_max:
            raise ValueError("need v_min < vdd < v_max")
        if self.v_min >= self.v_max or self.window <= 0:
            raise ValueError("need v_min < v_max and window > 0")

    @classmethod
    def from_vdd(cls, vdd: float, band: float = 0.05, window: float = 2e-9) -> VviSpec:
        return cls(vdd * (1 - band), vdd * (1 + band), window, vdd)


@dataclass
class VviReport:
    labels: tuple[str, ...]
    per_node: np.ndarray

    @property
    def total(self) -> float:
        return float(self.per_node.sum())

    @property
    def violation_count(self) -> int:
        return int((self.per_node > 0).sum())

    def to_csv(self, path) -> None:
        from .io import write_vvi_csv

        write_vvi_csv(path, self)


def _clip_window(times, values, window):
    times = np.asarray(times, dtype=float)
    if times[0] > 0 or times[-1] < window * (1 - 1e-12):
        raise ValueError("waveform does not cover [0, window]")
    keep = times <= window * (1 + 1e-12)
    return times[keep], np.asarray(values)[keep]


def compute_vvi(times, trace, spec: VviSpec) -> float:
    """Area of the trace outside [v_min, v_max] over the window.

    The trace is linear between samples and threshold crossings inside a
    step are located by interpolation, so the result is exact for
    piecewise-linear waveforms. Repeated time stamps model vertical edges.
    """
    t, v = _clip_window(times, np.asarray(trace, dtype=float)[:, None], spec.window)
    return float(kernels.vvi_batch(t, v, spec.v_min, spec.v_max)[0])


def vvi_report(solution: TransientSolution, spec: VviSpec) -> VviReport:
    t, v = _clip_window(solution.times, solution.voltages, spec.window)
    return VviReport(solution.labels, kernels.vvi_batch(t, v, spec.v_min, spec.v_max))


def time_reward(report: VviReport, init: VviReport, layout: DecapLayout,
                floorplan: Floorplan, gamma: float) -> float:
    """Improvement ratio reward until the VVI tolerance is met, then MOS economy."""
    if init.total <= 0:
        raise PreconditionError("initial total VVI is zero: nothing to optimize")
    return reward_from_ratio(report.total / init.total, layout, floorplan, gamma)


def reward_from_ratio(ratio: float, layout: DecapLayout, floorplan: Floorplan, gamma: float) -> float:
    if ratio > gamma:
        return 1.0 - ratio
    max_mos = floorplan.max_mos()
    economy = 1.0 - layout.total_mos() / max_mos if max_mos > 0 else 1.0
    return 1.0 - gamma + economy
