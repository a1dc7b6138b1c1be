"""Genetic algorithm and generalized simulated annealing over integer level vectors.

Both minimize ``cost = -reward`` under a fixed number of cost evaluations and
return the best-so-far cost after every evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .floorplan import N_LEVELS, DecapLayout
from .problem import FreqProblem


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "ga"
    budget: int = 1000
    seed: int = 0
    population: int = 64
    crossover: float = 0.9
    mutation: float = 0.05
    tournament: int = 3
    elitism: int = 1
    initial_temp: float = 5230.0
    visit: float = 2.62
    accept: float = -5.0
    restart_ratio: float = 2e-5

    def __post_init__(self):
        if self.method not in ("ga", "da"):
            raise ValueError("method must be 'ga' or 'da'")
        if self.budget < 1 or self.population < 1 or self.tournament < 1:
            raise ValueError("budget, population and tournament size must be >= 1")
        if not (0 <= self.crossover <= 1 and 0 <= self.mutation <= 1):
            raise ValueError("crossover and mutation rates must lie in [0, 1]")
        if self.initial_temp < 0:
            raise ValueError("initial temperature must be >= 0")
        if not 1 < self.visit < 3:
            raise ValueError("visiting parameter must lie in (1, 3)")
        if self.accept >= 1:
            raise ValueError("acceptance parameter must be < 1")


@dataclass
class BaselineResult:
    best: np.ndarray
    best_cost: float
    history: list[float] = field(default_factory=list)
    evaluations: int = 0


class _Counter:
    """Budgeted cost wrapper that records the best-so-far history."""

    def __init__(self, cost: Callable[[np.ndarray], float], budget: int):
        self.cost = cost
        self.budget = budget
        self.history: list[float] = []
        self.best = None
        self.best_cost = math.inf

    @property
    def exhausted(self) -> bool:
        return len(self.history) >= self.budget

    def __call__(self, genome: np.ndarray) -> float:
        c = float(self.cost(genome))
        if c < self.best_cost:
            self.best_cost = c
            self.best = genome.copy()
        self.history.append(self.best_cost)
        return c

    def result(self) -> BaselineResult:
        return BaselineResult(self.best, self.best_cost, self.history, len(self.history))


def ga_minimize(cost, n_genes: int, cfg: BaselineConfig, high: int = N_LEVELS) -> BaselineResult:
    """Tournament selection, uniform crossover, per-gene reset mutation, elitism."""
    rng = np.random.default_rng(cfg.seed)
    ev = _Counter(cost, cfg.budget)
    pop, fit = [], []
    for _ in range(cfg.population):
        if ev.exhausted:
            break
        g = rng.integers(0, high + 1, n_genes)
        pop.append(g)
        fit.append(ev(g))
    while not ev.exhausted:
        order = np.argsort(fit, kind="stable")
        new_pop = [pop[i] for i in order[: cfg.elitism]]
        new_fit = [fit[i] for i in order[: cfg.elitism]]

        def pick():
            idx = rng.integers(0, len(pop), cfg.tournament)
            return pop[min(idx, key=lambda i: (fit[i], i))]

        while len(new_pop) < cfg.population and not ev.exhausted:
            p1, p2 = pick(), pick()
            if rng.random() < cfg.crossover:
                child = np.where(rng.random(n_genes) < 0.5, p1, p2)
            else:
                child = p1.copy()
            reset = rng.random(n_genes) < cfg.mutation
            child = np.where(reset, rng.integers(0, high + 1, n_genes), child)
            new_pop.append(child)
            new_fit.append(ev(child))
        pop, fit = new_pop, new_fit
    return ev.result()


def _visit_scale(qv: float, temperature: float) -> float:
    # width of the distorted Cauchy-Lorentz visiting distribution
    f1 = math.exp(math.log(temperature) / (qv - 1))
    f2 = math.exp((4 - qv) * math.log(qv - 1))
    f3 = math.exp((2 - qv) * math.log(2) / (qv - 1))
    f4 = math.sqrt(math.pi) * f1 * f2 / (f3 * (3 - qv))
    f5 = 1 / (qv - 1) - 0.5
    f6 = math.pi * (1 - f5) / math.sin(math.pi * (1 - f5)) / math.exp(gammaln(2 - f5))
    return math.exp(-(qv - 1) * math.log(f6 / f4) / (3 - qv))


def _visit(rng, qv: float, temperature: float, size: int) -> np.ndarray:
    if temperature <= 0:
        return rng.choice([-1.0, 1.0], size)  # nearest-neighbour moves in the greedy limit
    sigma = _visit_scale(qv, temperature)
    x = sigma * rng.standard_normal(size)
    y = np.abs(rng.standard_normal(size)) + 1e-300
    return x / np.exp((qv - 1) * np.log(y) / (3 - qv))


def _wrap(x: np.ndarray, high: int) -> np.ndarray:
    span = high + 1
    return np.mod(np.rint(x), span).astype(np.int64)


def da_minimize(cost, n_genes: int, cfg: BaselineConfig, high: int = N_LEVELS) -> BaselineResult:
    """Generalized simulated annealing on integer genomes.

    Each iteration makes one full-dimensional jump and then one jump per
    gene. Worse states are accepted with the generalized Metropolis rule at
    temperature ``T / (k + 1)``; with ``initial_temp = 0`` only improvements
    are ever accepted.
    """
    rng = np.random.default_rng(cfg.seed)
    ev = _Counter(cost, cfg.budget)
    qv, qa, t0 = cfg.visit, cfg.accept, cfg.initial_temp
    cur = rng.integers(0, high + 1, n_genes)
    cur_cost = ev(cur)
    k = 0
    while not ev.exhausted:
        k += 1
        if t0 > 0:
            temp = t0 * (2.0 ** (qv - 1) - 1) / ((1.0 + k) ** (qv - 1) - 1)
            if temp < cfg.restart_ratio * t0:
                k = 0
                cur = rng.integers(0, high + 1, n_genes)
                cur_cost = ev(cur)
                continue
        else:
            temp = 0.0
        t_accept = temp / (k + 1)
        for j in range(-1, n_genes):
            if ev.exhausted:
                break
            cand = cur.copy()
            if j < 0:
                cand = _wrap(cur + _visit(rng, qv, temp, n_genes), high)
            else:
                cand[j] = _wrap(cur[j] + _visit(rng, qv, temp, 1), high)[0]
            c = ev(cand)
            delta = c - cur_cost
            if delta <= 0:
                cur, cur_cost = cand, c
                continue
            if t_accept <= 0:
                continue
            p = 1.0 - (1.0 - qa) * delta / t_accept
            if p > 0 and rng.random() <= math.exp(math.log(p) / (1.0 - qa)):
                cur, cur_cost = cand, c
    return ev.result()


def layout_cost(problem: FreqProblem) -> Callable[[np.ndarray], float]:
    empty = DecapLayout.empty(problem.floorplan)
    cache: dict[bytes, float] = {}

    def cost(genome: np.ndarray) -> float:
        key = np.asarray(genome, dtype=np.int64).tobytes()
        if key not in cache:
            layout = empty.with_vector(problem.floorplan, genome)
            cache[key] = -problem.evaluate(layout)[0]
        return cache[key]

    return cost


def optimize_layout(problem: FreqProblem, cfg: BaselineConfig) -> tuple[DecapLayout, BaselineResult]:
    n = len(DecapLayout.empty(problem.floorplan).to_vector(problem.floorplan))
    run = ga_minimize if cfg.method == "ga" else da_minimize
    res = run(layout_cost(problem), n, cfg)
    layout = DecapLayout.empty(problem.floorplan).with_vector(problem.floorplan, res.best)
    return layout, res


def ga_optimize(problem: FreqProblem, cfg: BaselineConfig):
    return optimize_layout(problem, BaselineConfig(**{**cfg.__dict__, "method": "ga"}))


def da_optimize(problem: FreqProblem, cfg: BaselineConfig):
    return optimize_layout(problem, BaselineConfig(**{**cfg.__dict__, "method": "da"}))
