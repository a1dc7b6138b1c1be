from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdn25d import kernels
from pdn25d.errors import PreconditionError
from pdn25d.floorplan import DecapLayout
from pdn25d.transient import TransientSolution
from pdn25d.vvi import VviReport, VviSpec, compute_vvi, reward_from_ratio, time_reward, vvi_report

BAND = VviSpec.from_vdd(1.0, 0.05, 2e-9)


def rectangle(depth_from: float, level: float, t0: float, t1: float):
    t = np.array([0.0, t0, t0, t1, t1, 2e-9])
    v = np.array([depth_from, depth_from, level, level, depth_from, depth_from])
    return t, v


def quadrature_errors() -> dict[str, float]:
    out = {}
    # 10 mV x 1 ns rectangle below a 10 mV threshold: exactly 1e-11 V*s
    t, v = rectangle(0.02, 0.0, 0.5e-9, 1.5e-9)
    out["rect_exact"] = compute_vvi(t, v, VviSpec(0.01, 1.0, 2e-9)) - 1e-11
    # the same rectangle at the 5 % band of a 1 V rail
    t, v = rectangle(1.0, 0.94, 0.5e-9, 1.5e-9)
    out["rect_band"] = compute_vvi(t, v, BAND) - 1e-11
    # undershoot triangle 1 V -> 0.9 V -> 1 V over 2 ns: crossings at 0.5 and 1.5 ns
    t = np.array([0.0, 1e-9, 2e-9])
    out["tri_under"] = compute_vvi(t, np.array([1.0, 0.9, 1.0]), BAND) - 0.5 * 1e-9 * 0.05
    # overshoot triangle to 1.1 V
    out["tri_over"] = compute_vvi(t, np.array([1.0, 1.1, 1.0]), BAND) - 0.5 * 1e-9 * 0.05
    # ramp crossing both bounds: 1.1 V down to 0.9 V
    out["ramp"] = compute_vvi(np.array([0.0, 2e-9]), np.array([1.1, 0.9]), BAND) - 2 * 0.5 * 0.5e-9 * 0.05
    return out


def test_quadrature_fixtures():
    errs = quadrature_errors()
    assert errs["rect_exact"] == 0.0
    for name, e in errs.items():
        assert abs(e) <= 1e-15, name


def test_inside_band_is_zero():
    t = np.linspace(0, 2e-9, 11)
    assert compute_vvi(t, 1.0 + 0.04 * np.sin(t * 1e10), BAND) == 0.0


def test_window_clipping_and_coverage():
    t = np.array([0.0, 1e-9, 3e-9])
    v = np.array([0.9, 0.9, 0.9])
    assert compute_vvi(t, v, VviSpec(0.95, 1.05, 1e-9)) == pytest.approx(0.05 * 1e-9)
    with pytest.raises(ValueError):
        compute_vvi(np.array([0.0, 0.5e-9]), np.array([1.0, 1.0]), BAND)


@pytest.mark.skipif(not kernels.HAVE_EXTENSION, reason="compiled kernels not built")
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 2e-9, 50)
    v = 1.0 + 0.1 * rng.standard_normal((50, 3))
    a = kernels.vvi_batch(t, v, 0.95, 1.05, backend="python")
    b = kernels.vvi_batch(t, v, 0.95, 1.05, backend="cython")
    assert np.allclose(a, b, rtol=1e-13, atol=1e-28)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.8, 1.2), min_size=2, max_size=30))
def test_vvi_is_nonnegative_and_bounded(values):
    t = np.linspace(0, 2e-9, len(values))
    vvi = compute_vvi(t, np.array(values), BAND)
    assert vvi >= 0
    assert vvi <= 2e-9 * max(abs(v - 1.0) for v in values) + 1e-24


def test_report_and_csv(tmp_path):
    t = np.array([0.0, 1e-9, 2e-9])
    volts = np.array([[1.0, 1.0], [0.9, 1.0], [1.0, 1.0]])
    sol = TransientSolution(t, (1, 2), ("c_0_0", "c_0_1"), volts)
    rep = vvi_report(sol, BAND)
    assert rep.violation_count == 1
    assert rep.total == pytest.approx(2.5e-11)
    path = tmp_path / "v.csv"
    rep.to_csv(path)
    assert path.read_text().splitlines()[0] == "node,vvi_vs"


def test_time_reward_branches(toy_fp):
    lay = DecapLayout.empty(toy_fp)
    lay.mos["c0"][:] = 5
    init = VviReport(("a",), np.array([2.0]))
    # above tolerance: 1 - ratio
    assert time_reward(VviReport(("a",), np.array([1.0])), init, lay, toy_fp, 0.2) == pytest.approx(0.5)
    # unchanged design
    assert time_reward(init, init, lay, toy_fp, 0.2) == 0.0
    # within tolerance: 1 - gamma + MOS economy
    assert time_reward(VviReport(("a",), np.array([0.2])), init, lay, toy_fp, 0.2) == pytest.approx(0.8 + 0.5)
    assert reward_from_ratio(0.0, lay, toy_fp, 0.0) == pytest.approx(1.5)
    with pytest.raises(PreconditionError):
        time_reward(init, VviReport(("a",), np.array([0.0])), lay, toy_fp, 0.1)


def test_spec_validation():
    with pytest.raises(ValueError):
        VviSpec(1.0, 0.9, 1e-9)
    with pytest.raises(ValueError):
        VviSpec(0.9, 1.1, 0.0)
    with pytest.raises(ValueError):
        VviSpec(0.9, 1.1, 1e-9, vdd=1.2)
