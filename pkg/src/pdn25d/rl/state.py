"""State matrices and the ternary action space over UDC slots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..floorplan import N_LEVELS, DecapLayout, Floorplan

FREQ_CHANNELS = ("interposer_space", "chiplet_space", "mim_dist", "mos_dist")
TIME_CHANNELS = FREQ_CHANNELS + ("vvi",)


def encode_freq_state(fp: Floorplan, layout: DecapLayout) -> np.ndarray:
    """Four channels on the interposer canvas; chiplets sit at their origins."""
    rows, cols = fp.interposer_dims
    out = np.zeros((4, rows, cols))
    out[0] = fp.interposer_space
    out[2] = layout.mim / N_LEVELS
    for chip in fp.chiplets:
        r0, c0 = chip.origin
        cr, cc = chip.dims
        out[1, r0 : r0 + cr, c0 : c0 + cc] = chip.space
        out[3, r0 : r0 + cr, c0 : c0 + cc] = layout.mos[chip.name] / N_LEVELS
    return out


def encode_time_state(fp: Floorplan, layout: DecapLayout, vvi_grid: np.ndarray,
                      vvi_scale: float) -> np.ndarray:
    """Frequency channels plus per-node VVI divided by ``vvi_scale``.

    ``vvi_scale`` is the largest per-node VVI of the episode's initial design,
    so the initial encoding peaks at exactly 1.
    """
    base = encode_freq_state(fp, layout)
    vvi = np.asarray(vvi_grid, dtype=float) / vvi_scale if vvi_scale > 0 else np.zeros_like(vvi_grid)
    return np.concatenate([base, vvi[None]], axis=0)


@dataclass(frozen=True)
class SlotMap:
    """Every UDC of the interposer and of each chiplet, with an action mask.

    The policy emits one categorical per slot. Slots with mask 0 (infeasible
    UDCs, or interposer UDCs during the time phase) always take action 0.
    The order of active slots matches ``DecapLayout.to_vector``.
    """

    mask: np.ndarray
    include_mim: bool

    @classmethod
    def build(cls, fp: Floorplan, include_mim: bool = True) -> SlotMap:
        parts = [fp.interposer_space.ravel() * (1 if include_mim else 0)]
        parts += [c.space.ravel() for c in fp.chiplets]
        return cls(np.concatenate(parts).astype(bool), include_mim)

    @property
    def n_slots(self) -> int:
        return len(self.mask)

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    def to_action_vector(self, choice: np.ndarray) -> np.ndarray:
        """Category indices (0, 1, 2) over all slots -> steps (-1, 0, +1) over active slots."""
        return (np.asarray(choice)[self.mask] - 1).astype(np.int64)


def apply_action(fp: Floorplan, layout: DecapLayout, action, include_mim: bool = True) -> DecapLayout:
    """Add a ternary step per active UDC and clamp to 0..10."""
    action = np.asarray(action, dtype=np.int64)
    vec = layout.to_vector(fp, include_mim)
    if action.shape != vec.shape:
        raise ValueError(f"action length {len(action)} != {len(vec)} available UDCs")
    if np.abs(action).max(initial=0) > 1:
        raise ValueError("action entries must be -1, 0 or +1")
    return layout.with_vector(fp, np.clip(vec + action, 0, N_LEVELS), include_mim)
