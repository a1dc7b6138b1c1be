"""Target-impedance mask, compliance check and the frequency-phase reward."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .floorplan import DecapLayout, Floorplan
from .mna import AcSolution


@dataclass(frozen=True)
class TargetImpedanceSpec:
    vdd: float
    ripple: float
    p_max: float
    t_r: float

    def __post_init__(self):
        if min(self.vdd, self.p_max, self.t_r) <= 0:
            raise ValueError("vdd, p_max and t_r must be positive")
        if not 0 < self.ripple < 1:
            raise ValueError("ripple must lie in (0, 1)")

    @property
    def i_ref(self) -> float:
        return self.p_max / (2 * self.vdd)

    @property
    def i_max(self) -> float:
        return 2 * self.i_ref

    @property
    def f_knee(self) -> float:
        return 0.35 / self.t_r

    @property
    def z_flat(self) -> float:
        return self.vdd * self.ripple / self.i_ref

    @classmethod
    def from_flat(cls, vdd: float, ripple: float, z_flat: float, f_knee: float) -> TargetImpedanceSpec:
        """Target whose flat region equals ``z_flat`` and whose knee sits at ``f_knee``."""
        i_ref = vdd * ripple / z_flat
        return cls(vdd=vdd, ripple=ripple, p_max=2 * vdd * i_ref, t_r=0.35 / f_knee)


# vdd = 1 V, 5 % ripple, 35 mOhm flat region, knee at 3.4 GHz
ROCKET64_TARGET = TargetImpedanceSpec(vdd=1.0, ripple=0.05, p_max=2 / 0.7, t_r=0.35 / 3.4e9)


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or not math.isclose(self.alpha + self.beta, 1.0):
            raise ValueError("alpha and beta must be >= 0 and sum to 1")


def target_impedance(spec: TargetImpedanceSpec, f):
    """Flat below the knee, rising 20 dB/dec above it."""
    f_arr = np.asarray(f, dtype=float)
    if (f_arr <= 0).any():
        raise ValueError("frequency must be > 0")
    z = spec.z_flat * np.maximum(f_arr / spec.f_knee, 1.0)
    return float(z) if z.ndim == 0 else z


def mask_violation(ac: AcSolution, spec: TargetImpedanceSpec) -> np.ndarray:
    """Worst excess of |Z| over the mask across ports, per frequency (signed)."""
    z = np.abs(ac.z)
    if z.ndim != 2 or z.shape[1] == 0:
        raise ValueError("no ports to probe")
    if z.shape[0] == 0:
        raise ValueError("empty AC solution")
    return (z - target_impedance(spec, ac.frequencies)[:, None]).max(axis=1)


def is_compliant(excess: np.ndarray) -> bool:
    return bool((np.asarray(excess) <= 0).all())


def capacitance_score(layout: DecapLayout, floorplan: Floorplan, weights: RewardWeights) -> float:
    score = 0.0
    max_mos, max_mim = floorplan.max_mos(), floorplan.max_mim()
    score += weights.alpha * (1 - layout.total_mos() / max_mos) if max_mos > 0 else weights.alpha
    score += weights.beta * (1 - layout.total_mim() / max_mim) if max_mim > 0 else weights.beta
    return score


def freq_reward(
    ac: AcSolution,
    spec: TargetImpedanceSpec,
    layout: DecapLayout,
    weights: RewardWeights,
    floorplan: Floorplan,
) -> float:
    """Negative total excess while the mask is violated, capacitance economy otherwise."""
    excess = mask_violation(ac, spec)
    return reward_from_excess(excess, layout, weights, floorplan)


def reward_from_excess(excess, layout, weights, floorplan) -> float:
    if not is_compliant(excess):
        return -float(np.clip(excess, 0.0, None).sum())
    return capacitance_score(layout, floorplan, weights)
