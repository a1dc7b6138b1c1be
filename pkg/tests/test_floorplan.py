from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdn25d.errors import CaseFileError, InvalidFloorplanError, LayoutViolationError
from pdn25d.floorplan import Chiplet, DecapLayout, Floorplan, Port
from pdn25d.params import MIM_STEP, MOS_STEP, ROCKET64_55NM, preset

from conftest import two_chip_floorplan


def test_preset_lookup_and_overrides():
    assert preset("rocket64-55nm") is ROCKET64_55NM
    p = ROCKET64_55NM.with_overrides({"vdd": 0.9})
    assert p.vdd == 0.9 and ROCKET64_55NM.vdd == 1.0
    with pytest.raises(CaseFileError):
        preset("nope")
    with pytest.raises(CaseFileError):
        ROCKET64_55NM.with_overrides({"bogus": 1.0})


def test_params_reject_nonpositive_values():
    with pytest.raises(ValueError):
        ROCKET64_55NM.with_overrides({"r_chip": 0.0})
    with pytest.raises(ValueError):
        ROCKET64_55NM.with_overrides({"mim_esr_per_f": -1.0})


def test_esr_scales_inversely_with_capacitance():
    p = ROCKET64_55NM
    assert p.mos_esr(50e-12) == pytest.approx(24e-12 / 50e-12)
    assert p.mos_esr(100e-12) == pytest.approx(p.mos_esr(50e-12) / 2)


def test_floorplan_counts(two_fp):
    assert two_fp.n_intp == 11
    assert two_fp.n_chip == 3 + 4
    assert two_fp.max_mim() == pytest.approx(11 * 10 * MIM_STEP)
    assert two_fp.max_mos() == pytest.approx(7 * 10 * MOS_STEP)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(chiplets=[Chiplet("a", (2, 2), (2, 2), np.ones((2, 2)))]),  # off the interposer
        dict(chiplets=[Chiplet("a", (0, 0), (2, 2), np.ones((2, 2))),
                       Chiplet("b", (1, 1), (2, 2), np.ones((2, 2)))]),  # overlap
        dict(chiplets=[Chiplet("a", (0, 0), (2, 2), np.ones((2, 2))),
                       Chiplet("a", (0, 2), (1, 1), np.ones((1, 1)))]),  # duplicate name
        dict(chiplets=[Chiplet("a", (0, 0), (2, 2), np.full((2, 2), 2))]),  # non-binary space
        dict(chiplets=[Chiplet("a", (0, 0), (2, 2), np.ones((2, 2)), [(2, 0)])]),  # io site
        dict(tsv_sites=[(3, 0)]),
        dict(tsv_sites=[(0, 0), (0, 0)]),
        dict(probe_ports=[Port("zz", 0, 0)]),
        dict(interposer_space=np.ones((2, 2))),
    ],
)
def test_invalid_floorplans(kwargs):
    base = dict(interposer_dims=(3, 3), chiplets=[], tsv_sites=[(0, 0)])
    base.update(kwargs)
    with pytest.raises(InvalidFloorplanError):
        Floorplan(**base)


def test_layout_validation(two_fp):
    lay = DecapLayout.saturated(two_fp)
    lay.validate(two_fp)
    assert lay.mim[2, 3] == 0 and lay.mos["a"][1, 0] == 0
    bad = lay.copy()
    bad.mim[2, 3] = 1
    with pytest.raises(LayoutViolationError):
        bad.validate(two_fp)
    bad = lay.copy()
    bad.mos["b"][0, 0] = 11
    with pytest.raises(LayoutViolationError):
        bad.validate(two_fp)
    bad = lay.copy()
    del bad.mos["b"]
    with pytest.raises(LayoutViolationError):
        bad.validate(two_fp)


def test_vector_ordering(two_fp):
    lay = DecapLayout.empty(two_fp)
    vec = np.arange(len(lay.to_vector(two_fp))) % 11
    out = lay.with_vector(two_fp, vec)
    # interposer feasible cells row-major first, then chiplets in floorplan order
    assert out.mim[0, 0] == 0 and out.mim[0, 1] == 1 and out.mim[2, 2] == 10
    assert out.mos["a"][0, 0] == 11 % 11 and out.mos["a"][1, 1] == 13 % 11
    assert out.mos["b"][1, 1] == 17 % 11
    with pytest.raises(LayoutViolationError):
        lay.with_vector(two_fp, vec[:-1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=18, max_size=18))
def test_vector_roundtrip(genes):
    fp = two_chip_floorplan()
    lay = DecapLayout.empty(fp).with_vector(fp, np.array(genes))
    lay.validate(fp)
    assert lay.to_vector(fp).tolist() == genes
    mos_only = lay.to_vector(fp, include_mim=False)
    assert lay.with_vector(fp, mos_only, include_mim=False) == lay
    assert lay.total_mim() == pytest.approx(sum(genes[:11]) * MIM_STEP)
    assert lay.total_mos() == pytest.approx(sum(genes[11:]) * MOS_STEP)


def test_layout_json_roundtrip(tmp_path, two_fp):
    rng = np.random.default_rng(3)
    lay = DecapLayout.empty(two_fp).with_vector(two_fp, rng.integers(0, 11, 18))
    path = tmp_path / "lay.json"
    lay.save(path)
    assert DecapLayout.load(path) == lay
    with pytest.raises(LayoutViolationError):
        DecapLayout.from_json_obj({"mim": []})
