"""Seeded PWL load-current profiles for chiplets.

Internal currents are trains of non-negative triangular pulses, one train
per on-chip node, scaled together so the chiplet total peaks at a chosen
fraction of ``i_ref``. I/O currents are bipolar: every triangle is followed
by its mirror image, so each train integrates to zero exactly. The I/O
sources of a chiplet mix one shared train with one private train per source,
weighted ``sqrt(rho)`` and ``sqrt(1 - rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transient import PwlSource

TOL = 1e-12


@dataclass(frozen=True)
class CurrentConfig:
    t_end: float = 2e-9
    width_min: float = 50e-12
    width_max: float = 300e-12
    gap_max: float = 300e-12
    utilization: float = 1.0  # internal aggregate peak as a fraction of i_ref
    io_fraction: float = 0.05  # per-source I/O amplitude bound as a fraction of i_ref

    def __post_init__(self):
        if not 0 < self.width_min <= self.width_max:
            raise ValueError("need 0 < width_min <= width_max")
        if not 0 < self.utilization <= 1:
            raise ValueError("utilization must lie in (0, 1]")
        if not 0 < self.io_fraction <= 1:
            raise ValueError("io_fraction must lie in (0, 1]")


@dataclass
class CurrentProfile:
    internal: list[PwlSource]
    io: list[PwlSource]
    correlation: float
    seed: int
    i_ref: float
    i_max: float
    chiplet: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def sources(self) -> list[PwlSource]:
        return self.internal + self.io

    def breakpoints(self) -> np.ndarray:
        return _union_times(self.sources)

    def aggregates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(times, internal sum, I/O sum) at every breakpoint of every source."""
        t = self.breakpoints()
        return t, _sum_at(self.internal, t), _sum_at(self.io, t)

    def constraint_report(self) -> dict[str, bool]:
        t, i_sum, io_sum = self.aggregates()
        tol = TOL * self.i_ref
        total = i_sum + np.abs(io_sum)
        return {
            "internal_sum_le_iref": bool((i_sum <= self.i_ref + tol).all()),
            "io_sum_le_iref": bool((np.abs(io_sum) <= self.i_ref + tol).all()),
            "total_in_range": bool((total >= -tol).all() and (total <= self.i_max + tol).all()),
            "io_zero_integral": all(abs(s.integral()) <= 1e-15 for s in self.io),
        }


def _union_times(sources) -> np.ndarray:
    if not sources:
        return np.zeros(0)
    return np.unique(np.concatenate([np.asarray(s.times) for s in sources]))


def _sum_at(sources, t) -> np.ndarray:
    total = np.zeros(len(t))
    for s in sources:
        total += s.sample(t)
    return total


def _triangle_train(rng, cfg: CurrentConfig, amplitude: float, bipolar: bool):
    """Breakpoints of a sequence of (possibly mirrored) triangles on [0, t_end]."""
    times, values = [0.0], [0.0]
    t = 0.0
    while True:
        gap = rng.uniform(1e-12, cfg.gap_max)
        width = rng.uniform(cfg.width_min, cfg.width_max)
        peak = amplitude * rng.uniform(0.3, 1.0)
        span = 2 * width if bipolar else width
        start = t + gap
        if start + span > cfg.t_end:
            break
        if bipolar:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            times += [start, start + width / 2, start + width, start + 1.5 * width, start + 2 * width]
            values += [0.0, sign * peak, 0.0, -sign * peak, 0.0]
        else:
            times += [start, start + width / 2, start + width]
            values += [0.0, peak, 0.0]
        t = start + span
    if times[-1] < cfg.t_end:
        times.append(cfg.t_end)
        values.append(0.0)
    return np.array(times), np.array(values)


def gen_internal_currents(nodes, i_ref: float, seed: int, cfg: CurrentConfig | None = None):
    """One non-negative pulse train per node; the aggregate peaks at utilization * i_ref."""
    cfg = cfg or CurrentConfig()
    nodes = list(nodes)
    if not nodes:
        raise ValueError("node list is empty")
    if i_ref <= 0:
        raise ValueError("i_ref must be > 0")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    trains = [_triangle_train(rng, cfg, 2.0 * i_ref / len(nodes), bipolar=False) for _ in nodes]
    t = np.unique(np.concatenate([tt for tt, _ in trains]))
    peak = sum(np.interp(t, tt, vv) for tt, vv in trains).max()
    scale = cfg.utilization * i_ref / peak if peak > 0 else 0.0
    # guard against rounding pushing the rescaled sum past the bound
    while peak * scale > i_ref:
        scale *= 1 - 4e-16
    sources = [PwlSource.from_arrays(n, tt, vv * scale) for n, (tt, vv) in zip(nodes, trains)]
    total = _sum_at(sources, _union_times(sources))
    while total.max() > i_ref:
        sources = [PwlSource.from_arrays(s.node, s.times, np.asarray(s.values) * (1 - 1e-15))
                   for s in sources]
        total = _sum_at(sources, _union_times(sources))
    return sources


def _mix(t_grid, shared, private, ws, wp):
    v = np.zeros(len(t_grid))
    if shared is not None:
        v += ws * np.interp(t_grid, *shared)
    if private is not None:
        v += wp * np.interp(t_grid, *private)
    return v


def gen_io_currents(sites, rho: float, i_ref: float, seed: int, cfg: CurrentConfig | None = None):
    """Zero-integral bipolar sources with pairwise correlation controlled by ``rho``."""
    cfg = cfg or CurrentConfig()
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    sites = list(sites)
    if not sites:
        return []
    amp = cfg.io_fraction * i_ref
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    ws, wp = float(np.sqrt(rho)), float(np.sqrt(1 - rho))
    shared = _triangle_train(rng, cfg, amp, bipolar=True) if ws > 0 else None
    sources = []
    for node in sites:
        private = _triangle_train(rng, cfg, amp, bipolar=True) if wp > 0 else None
        parts = [p[0] for p in (shared, private) if p is not None]
        t = np.unique(np.concatenate(parts))
        v = _mix(t, shared, private, ws, wp)
        peak = np.abs(v).max()
        if peak > amp:
            v *= amp / peak
            while np.abs(v).max() > amp:
                v *= 1 - 1e-15
        sources.append(PwlSource.from_arrays(node, t, v))
    t = _union_times(sources)
    agg = np.abs(_sum_at(sources, t)).max()
    if agg > i_ref:
        sources = [PwlSource.from_arrays(s.node, s.times, np.asarray(s.values) * (i_ref / agg))
                   for s in sources]
    return sources


def gen_profile(internal_nodes, io_nodes, rho: float, i_ref: float, seed: int,
                cfg: CurrentConfig | None = None, chiplet: str = "") -> CurrentProfile:
    cfg = cfg or CurrentConfig()
    ss = np.random.SeedSequence([seed, sum(map(ord, chiplet))])
    s_int, s_io = (int(x.generate_state(1)[0]) for x in ss.spawn(2))
    internal = gen_internal_currents(internal_nodes, i_ref, s_int, cfg)
    io = gen_io_currents(io_nodes, rho, i_ref, s_io, cfg)
    return CurrentProfile(internal, io, rho, seed, i_ref, 2 * i_ref, chiplet)
