"""Strict YAML case files.

A case has the top-level sections ``name``, ``params``, ``floorplan``,
``target``, ``time`` and ``opt``. Unknown keys are rejected, and every
error carries the line number of the offending node.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .baselines import BaselineConfig
from .currents import CurrentConfig
from .errors import CaseFileError, PdnError
from .floorplan import Chiplet, Floorplan, Port
from .freq import RewardWeights, TargetImpedanceSpec
from .mna import default_frequencies
from .params import PRESETS, PdnParams
from .problem import FreqProblem, TimeProblem, make_profiles
from .rl.ppo import PpoConfig
from .vvi import VviSpec

CASES_DIR = Path(__file__).parent / "cases"


class _Doc:
    """Parsed YAML plus a map from key paths to source line numbers."""

    def __init__(self, text: str):
        try:
            root = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise CaseFileError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                                line=mark.line + 1 if mark else None) from None
        self.lines: dict[tuple, int] = {}
        if root is not None:
            self._walk(root, ())

    def _walk(self, node, path):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                self.lines[path + (k.value,)] = k.start_mark.line + 1
                self._walk(v, path + (k.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk(v, path + (i,))

    def line(self, path) -> int | None:
        path = tuple(path)
        while path and path not in self.lines:
            path = path[:-1]
        return self.lines.get(path)

    def error(self, path, msg) -> CaseFileError:
        where = ".".join(str(p) for p in path) or "<root>"
        return CaseFileError(f"{where}: {msg}", line=self.line(path))


class _Section:
    """Typed accessors over one mapping of the document."""

    def __init__(self, doc: _Doc, path: tuple, value, allowed: set[str], required: set[str] = frozenset()):
        self.doc, self.path = doc, path
        if value is None:
            value = {}
        if not isinstance(value, dict):
            raise doc.error(path, "expected a mapping")
        unknown = sorted(set(value) - allowed)
        if unknown:
            raise doc.error(path + (unknown[0],), f"unknown key {unknown[0]!r}")
        missing = sorted(set(required) - set(value))
        if missing:
            raise doc.error(path, f"missing required key {missing[0]!r}")
        self.value = value

    def has(self, key) -> bool:
        return key in self.value

    def raw(self, key, default=None):
        return self.value.get(key, default)

    def number(self, key, default=None, positive=False, nonneg=False, integer=False):
        if key not in self.value:
            if default is None:
                raise self.doc.error(self.path, f"missing required key {key!r}")
            return default
        v = self.value[key]
        p = self.path + (key,)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.doc.error(p, f"expected a number, got {v!r}")
        if integer and int(v) != v:
            raise self.doc.error(p, f"expected an integer, got {v!r}")
        if positive and not v > 0:
            raise self.doc.error(p, f"must be > 0, got {v!r}")
        if nonneg and v < 0:
            raise self.doc.error(p, f"must be >= 0, got {v!r}")
        return int(v) if integer else float(v)

    def sub(self, key, allowed, required=frozenset()) -> _Section:
        return _Section(self.doc, self.path + (key,), self.value.get(key), allowed, required)


def _coord(doc, path, v, n=2) -> tuple[int, ...]:
    if (not isinstance(v, list) or len(v) != n
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in v)):
        raise doc.error(path, f"expected a list of {n} integers, got {v!r}")
    return tuple(v)


def _matrix(doc, path, v, dims):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise doc.error(path, "expected a matrix of 0/1 entries") from None
    if arr.shape != tuple(dims):
        raise doc.error(path, f"matrix shape {arr.shape} != declared dims {tuple(dims)}")
    if not np.isin(arr, (0, 1)).all():
        raise doc.error(path, "matrix entries must be 0 or 1")
    return arr.astype(np.int8)


@dataclass
class TimeConfig:
    vvi: VviSpec
    dt: float
    t_end: float
    i_ref: float
    rho: tuple[float, ...]
    profiles: int
    seed: int
    train_rho: float
    train_profiles: int
    currents: CurrentConfig
    loss_frequency: float


@dataclass
class OptConfig:
    weights: RewardWeights
    gamma: float
    budget: int
    time_budget: int
    ppo: PpoConfig
    baseline: BaselineConfig
    stop_on_success: bool = True


@dataclass
class Case:
    name: str
    params: PdnParams
    floorplan: Floorplan
    target: TargetImpedanceSpec
    frequencies: np.ndarray
    time: TimeConfig
    opt: OptConfig
    source: str = ""
    digest: str = ""
    resolved: dict = field(default_factory=dict)

    def freq_problem(self) -> FreqProblem:
        return FreqProblem(self.floorplan, self.params, self.target, self.opt.weights, self.frequencies)

    def profile_sets(self, rho: float, n: int, seed: int):
        from .netlist import assemble_hierarchy

        net = assemble_hierarchy(self.floorplan, self.params)
        return [make_profiles(net, self.floorplan, rho, self.time.i_ref, seed + k, self.time.currents)
                for k in range(n)]

    def time_problem(self, rho: float | None = None, n: int | None = None, seed: int | None = None):
        rho = self.time.train_rho if rho is None else rho
        n = self.time.train_profiles if n is None else n
        seed = self.time.seed if seed is None else seed
        return TimeProblem(self.floorplan, self.params, self.time.vvi, self.profile_sets(rho, n, seed),
                           self.time.dt, self.time.t_end, self.time.loss_frequency)


TOP = {"name", "params", "floorplan", "target", "time", "opt"}
PPO_KEYS = {f.name for f in fields(PpoConfig)}
BASELINE_KEYS = {f.name for f in fields(BaselineConfig)} - {"method", "budget", "seed"}


def _params(doc, root) -> PdnParams:
    sec = root.sub("params", {"preset", "overrides"}, {"preset"})
    preset = sec.raw("preset")
    if preset not in PRESETS:
        raise doc.error(("params", "preset"), f"unknown preset {preset!r} (known: {', '.join(PRESETS)})")
    overrides = sec.raw("overrides") or {}
    if not isinstance(overrides, dict):
        raise doc.error(("params", "overrides"), "expected a mapping")
    known = {f.name for f in fields(PdnParams)}
    for k, v in overrides.items():
        if k not in known:
            raise doc.error(("params", "overrides", k), f"unknown parameter {k!r}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise doc.error(("params", "overrides", k), f"expected a number, got {v!r}")
    try:
        return PRESETS[preset].with_overrides({k: float(v) for k, v in overrides.items()})
    except (ValueError, PdnError) as exc:
        raise doc.error(("params", "overrides"), str(exc)) from None


def _floorplan(doc, root) -> Floorplan:
    sec = root.sub("floorplan", {"interposer", "tsv_sites", "chiplets", "probe_ports"},
                   {"interposer", "tsv_sites", "chiplets", "probe_ports"})
    ip = sec.sub("interposer", {"dims", "space"}, {"dims"})
    dims = _coord(doc, ("floorplan", "interposer", "dims"), ip.raw("dims"))
    space = (_matrix(doc, ("floorplan", "interposer", "space"), ip.raw("space"), dims)
             if ip.has("space") else None)
    tsv_raw = sec.raw("tsv_sites")
    if not isinstance(tsv_raw, list) or not tsv_raw:
        raise doc.error(("floorplan", "tsv_sites"), "expected a nonempty list of [row, col]")
    tsv = [_coord(doc, ("floorplan", "tsv_sites", i), v) for i, v in enumerate(tsv_raw)]
    chips = []
    chips_raw = sec.raw("chiplets")
    if not isinstance(chips_raw, list):
        raise doc.error(("floorplan", "chiplets"), "expected a list")
    for i, c in enumerate(chips_raw):
        path = ("floorplan", "chiplets", i)
        cs = _Section(doc, path, c, {"name", "origin", "dims", "space", "io_sites"},
                      {"name", "origin", "dims"})
        name = cs.raw("name")
        if not isinstance(name, str) or not name:
            raise doc.error(path + ("name",), "expected a nonempty string")
        cdims = _coord(doc, path + ("dims",), cs.raw("dims"))
        origin = _coord(doc, path + ("origin",), cs.raw("origin"))
        cspace = (_matrix(doc, path + ("space",), cs.raw("space"), cdims) if cs.has("space")
                  else np.ones(cdims, dtype=np.int8))
        io = [_coord(doc, path + ("io_sites", j), v) for j, v in enumerate(cs.raw("io_sites") or [])]
        for j, (r, cc) in enumerate(io):
            if not (0 <= r < cdims[0] and 0 <= cc < cdims[1]):
                raise doc.error(path + ("io_sites", j), f"io site {[r, cc]} outside chiplet dims {list(cdims)}")
        chips.append(Chiplet(name, origin, cdims, cspace, tuple(io)))
    ports = []
    for i, p in enumerate(sec.raw("probe_ports") or []):
        path = ("floorplan", "probe_ports", i)
        if not (isinstance(p, list) and len(p) == 3 and isinstance(p[0], str)):
            raise doc.error(path, f"expected [chiplet, row, col], got {p!r}")
        r, c = _coord(doc, path, p[1:])
        ports.append(Port(p[0], r, c))
    if not ports:
        raise doc.error(("floorplan", "probe_ports"), "at least one probe port is required")
    try:
        return Floorplan(dims, chips, space, tsv, ports)
    except PdnError as exc:
        raise doc.error(("floorplan",), str(exc)) from None


def _target(doc, root):
    sec = root.sub("target", {"vdd", "ripple", "p_max", "t_r", "sweep"}, {"vdd", "ripple", "p_max", "t_r"})
    try:
        spec = TargetImpedanceSpec(sec.number("vdd", positive=True), sec.number("ripple", positive=True),
                                   sec.number("p_max", positive=True), sec.number("t_r", positive=True))
    except ValueError as exc:
        raise doc.error(("target",), str(exc)) from None
    sw = sec.sub("sweep", {"f_start", "f_stop", "per_decade"})
    f0 = sw.number("f_start", 0.1e9, positive=True)
    f1 = sw.number("f_stop", 20e9, positive=True)
    if f1 <= f0:
        raise doc.error(("target", "sweep"), "f_stop must exceed f_start")
    return spec, default_frequencies(f0, f1, sw.number("per_decade", 100, positive=True, integer=True))


def _time(doc, root, target: TargetImpedanceSpec) -> TimeConfig:
    keys = {"band", "window", "dt", "t_end", "i_ref", "rho", "profiles", "seed", "train_rho",
            "train_profiles", "width_min", "width_max", "gap_max", "utilization", "io_fraction",
            "loss_frequency"}
    sec = root.sub("time", keys)
    band = sec.number("band", 0.05, positive=True)
    window = sec.number("window", 2e-9, positive=True)
    dt = sec.number("dt", 1e-12, positive=True)
    t_end = sec.number("t_end", window, positive=True)
    if t_end < window:
        raise doc.error(("time", "t_end"), "t_end must cover the VVI window")
    rho = sec.raw("rho", [0.0, 0.5, 1.0])
    if not isinstance(rho, list) or not rho:
        raise doc.error(("time", "rho"), "expected a nonempty list")
    for i, r in enumerate(rho):
        if isinstance(r, bool) or not isinstance(r, (int, float)) or not 0 <= r <= 1:
            raise doc.error(("time", "rho", i), f"correlation must lie in [0, 1], got {r!r}")
    train_rho = sec.number("train_rho", 0.9, nonneg=True)
    if train_rho > 1:
        raise doc.error(("time", "train_rho"), "correlation must lie in [0, 1]")
    try:
        vvi = VviSpec.from_vdd(target.vdd, band, window)
        currents = CurrentConfig(
            t_end=t_end,
            width_min=sec.number("width_min", 50e-12, positive=True),
            width_max=sec.number("width_max", 300e-12, positive=True),
            gap_max=sec.number("gap_max", 300e-12, positive=True),
            utilization=sec.number("utilization", 1.0, positive=True),
            io_fraction=sec.number("io_fraction", 0.05, positive=True),
        )
    except ValueError as exc:
        raise doc.error(("time",), str(exc)) from None
    return TimeConfig(
        vvi=vvi, dt=dt, t_end=t_end,
        i_ref=sec.number("i_ref", target.i_ref, positive=True),
        rho=tuple(float(r) for r in rho),
        profiles=sec.number("profiles", 50, positive=True, integer=True),
        seed=sec.number("seed", 0, nonneg=True, integer=True),
        train_rho=train_rho,
        train_profiles=sec.number("train_profiles", 4, positive=True, integer=True),
        currents=currents,
        loss_frequency=sec.number("loss_frequency", target.f_knee, positive=True),
    )


def _opt(doc, root) -> OptConfig:
    sec = root.sub("opt", {"alpha", "beta", "gamma", "budget", "time_budget", "ppo", "baseline",
                                "stop_on_success"})
    try:
        weights = RewardWeights(sec.number("alpha", 0.5, nonneg=True), sec.number("beta", 0.5, nonneg=True))
    except ValueError as exc:
        raise doc.error(("opt",), str(exc)) from None
    gamma = sec.number("gamma", 0.0, nonneg=True)
    if gamma > 1:
        raise doc.error(("opt", "gamma"), "gamma must lie in [0, 1]")
    budget = sec.number("budget", 2000, positive=True, integer=True)
    ppo_sec = sec.sub("ppo", PPO_KEYS)
    ppo_kw = dict(ppo_sec.value)
    if "conv_channels" in ppo_kw:
        ppo_kw["conv_channels"] = tuple(ppo_kw["conv_channels"])
    try:
        ppo = PpoConfig(**ppo_kw)
    except (TypeError, ValueError) as exc:
        raise doc.error(("opt", "ppo"), str(exc)) from None
    bl_sec = sec.sub("baseline", BASELINE_KEYS)
    try:
        baseline = BaselineConfig(budget=budget, **bl_sec.value)
    except (TypeError, ValueError) as exc:
        raise doc.error(("opt", "baseline"), str(exc)) from None
    stop = sec.raw("stop_on_success", True)
    if not isinstance(stop, bool):
        raise doc.error(("opt", "stop_on_success"), "expected true or false")
    return OptConfig(weights, gamma, budget,
                     sec.number("time_budget", budget, positive=True, integer=True), ppo, baseline, stop)


def parse_case(text: str, source: str = "<string>") -> Case:
    doc = _Doc(text)
    if not isinstance(doc.data, dict):
        raise CaseFileError("case file must be a mapping", line=1)
    root = _Section(doc, (), doc.data, TOP, {"name", "params", "floorplan", "target"})
    name = root.raw("name")
    if not isinstance(name, str) or not name:
        raise doc.error(("name",), "expected a nonempty string")
    params = _params(doc, root)
    floorplan = _floorplan(doc, root)
    target, freqs = _target(doc, root)
    time_cfg = _time(doc, root, target)
    opt = _opt(doc, root)
    return Case(name, params, floorplan, target, freqs, time_cfg, opt, source,
                hashlib.sha256(text.encode()).hexdigest(), doc.data)


def load_case(path: str | Path) -> Case:
    """Load a case file; bare names resolve to the bundled cases."""
    p = Path(path)
    if not p.exists() and (CASES_DIR / f"{path}.yaml").exists():
        p = CASES_DIR / f"{path}.yaml"
    return parse_case(p.read_text(), str(p))
