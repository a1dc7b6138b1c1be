"""Episodic environments for the frequency phase and the time phase."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PdnError, PreconditionError
from ..floorplan import DecapLayout
from ..problem import FreqProblem, TimeProblem
from ..vvi import VviReport, reward_from_ratio
from .state import SlotMap, apply_action, encode_freq_state, encode_time_state


@dataclass
class StepResult:
    layout: DecapLayout
    state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class FreqEnv:
    """Starts from the empty layout; an episode ends once the mask is met.

    With ``stop_on_success=False`` episodes always run ``max_steps`` steps, so
    the agent can keep trimming capacitance after the mask is met.
    """

    n_channels = 4

    def __init__(self, problem: FreqProblem, max_steps: int = 50, start: DecapLayout | None = None,
                 stop_on_success: bool = True):
        self.problem = problem
        self.stop_on_success = stop_on_success
        self.fp = problem.floorplan
        self.max_steps = max_steps
        self.slots = SlotMap.build(self.fp, include_mim=True)
        self.start = start.copy() if start is not None else DecapLayout.empty(self.fp)
        self.start.validate(self.fp)
        self._cache: dict[bytes, tuple[float, bool]] = {}
        self.layout = self.start.copy()
        self.steps = 0

    def _key(self, layout: DecapLayout) -> bytes:
        return layout.to_vector(self.fp).tobytes()

    def evaluate(self, layout: DecapLayout) -> tuple[float, bool]:
        key = self._key(layout)
        if key not in self._cache:
            self._cache[key] = self.problem.evaluate(layout)
        return self._cache[key]

    def reset(self) -> np.ndarray:
        self.layout = self.start.copy()
        self.steps = 0
        return encode_freq_state(self.fp, self.layout)

    def step(self, action) -> StepResult:
        self.layout = apply_action(self.fp, self.layout, action, include_mim=True)
        self.steps += 1
        try:
            reward, compliant = self.evaluate(self.layout)
        except PdnError as exc:
            raise PdnError(f"episode aborted at step {self.steps}: {exc}") from exc
        done = (compliant and self.stop_on_success) or self.steps >= self.max_steps
        return StepResult(self.layout, encode_freq_state(self.fp, self.layout), reward, done,
                          {"compliant": compliant})


class TimeEnv:
    """MOS-only refinement of a phase-1 layout under frozen load profiles."""

    n_channels = 5

    def __init__(self, problem: TimeProblem, start: DecapLayout, gamma: float, max_steps: int = 50,
                 stop_on_success: bool = True):
        if not 0 <= gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        self.problem = problem
        self.stop_on_success = stop_on_success
        self.fp = problem.floorplan
        self.gamma = gamma
        self.max_steps = max_steps
        self.slots = SlotMap.build(self.fp, include_mim=False)
        start.validate(self.fp)
        self.start = start.copy()
        self._cache: dict[bytes, VviReport] = {}
        self.init = self.report(self.start)
        if self.init.total <= 0:
            raise PreconditionError("starting layout has zero VVI: nothing to refine")
        self.vvi_scale = float(self.init.per_node.max())
        self.layout = self.start.copy()
        self.steps = 0

    def report(self, layout: DecapLayout) -> VviReport:
        key = layout.to_vector(self.fp, include_mim=False).tobytes()
        if key not in self._cache:
            self._cache[key] = self.problem.report(layout)
        return self._cache[key]

    def encode(self, layout: DecapLayout, report: VviReport) -> np.ndarray:
        return encode_time_state(self.fp, layout, self.problem.vvi_grid(report), self.vvi_scale)

    def evaluate(self, layout: DecapLayout) -> tuple[float, VviReport]:
        rep = self.report(layout)
        ratio = rep.total / self.init.total
        return reward_from_ratio(ratio, layout, self.fp, self.gamma), rep

    def reset(self) -> np.ndarray:
        self.layout = self.start.copy()
        self.steps = 0
        return self.encode(self.layout, self.init)

    def step(self, action) -> StepResult:
        self.layout = apply_action(self.fp, self.layout, action, include_mim=False)
        self.steps += 1
        try:
            reward, rep = self.evaluate(self.layout)
        except PdnError as exc:
            raise PdnError(f"episode aborted at step {self.steps}: {exc}") from exc
        ratio = rep.total / self.init.total
        done = (ratio <= self.gamma and self.stop_on_success) or self.steps >= self.max_steps
        info = {"ratio": ratio, "total_vvi": rep.total, "violations": rep.violation_count}
        return StepResult(self.layout, self.encode(self.layout, rep), reward, done, info)
