from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdn25d.errors import InvalidFloorplanError, LayoutViolationError
from pdn25d.floorplan import DecapLayout, Floorplan
from pdn25d.netlist import (
    SUPPLY,
    Branch,
    Netlist,
    apply_decaps,
    assemble_hierarchy,
    build_unit_cell_grid,
    decap_branches,
)
from pdn25d.params import MIM_STEP, MOS_STEP, ROCKET64_55NM

from conftest import two_chip_floorplan


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_unit_cell_grid_counts(rows, cols):
    net = build_unit_cell_grid((rows, cols), "chip", ROCKET64_55NM)
    links = rows * (cols - 1) + cols * (rows - 1)
    assert net.count("RL") == links
    assert net.count("C") == rows * cols
    assert net.count("G") == rows * cols
    assert net.n_nodes == rows * cols + 1
    for br in net.branches:
        if br.kind == "RL":
            assert br.value == (ROCKET64_55NM.r_chip, ROCKET64_55NM.l_chip)


def test_unit_cell_grid_errors():
    with pytest.raises(InvalidFloorplanError):
        build_unit_cell_grid((0, 2), "chip", ROCKET64_55NM)
    with pytest.raises(ValueError):
        build_unit_cell_grid((2, 2), "package", ROCKET64_55NM)


def test_toy_hierarchy_counts(toy_fp, params):
    net = assemble_hierarchy(toy_fp, params)
    assert net.n_nodes == 10
    assert net.count("RL") == 4 + 4 + 4 + 1
    assert net.count("C") == 4 + 4 + 1
    assert net.count("G") == 8
    assert net.count("V") == 1
    assert net.ports == ((net.labels[("c0", 1, 1)], 0),)
    assert net.port_names == ("c0_1_1",)
    assert SUPPLY in net.labels


def test_aggregated_bump_and_tsv_values(toy_fp, params):
    net = assemble_hierarchy(toy_fp, params)
    chip_node = net.labels[("c0", 0, 0)]
    below = net.labels[("intp", 0, 0)]
    ub = [b for b in net.branches if b.kind == "RL" and {b.a, b.b} == {chip_node, below}]
    assert ub[0].value == pytest.approx((params.r_ubump / 25, params.l_ubump / 25))
    supply = net.labels[SUPPLY]
    tsv = [b for b in net.branches if b.kind == "RL" and supply in (b.a, b.b)]
    assert tsv[0].value == pytest.approx(((params.r_tsv + params.r_bump) / 25,
                                          (params.l_tsv + params.l_bump) / 25))


def test_floorplan_without_tsv_is_rejected():
    fp = Floorplan((2, 2), [], None, [], [])
    with pytest.raises(InvalidFloorplanError):
        assemble_hierarchy(fp, ROCKET64_55NM)


def test_decap_branches_follow_levels(two_fp, params):
    net = assemble_hierarchy(two_fp, params)
    lay = DecapLayout.empty(two_fp)
    lay.mim[1, 1] = 3
    lay.mos["b"][0, 1] = 7
    extra = decap_branches(net, lay, params)
    assert len(extra) == 2
    by_node = {b.a: b for b in extra}
    mim = by_node[net.labels[("intp", 1, 1)]]
    assert mim.kind == "RC" and mim.value == pytest.approx((params.mim_esr(3 * MIM_STEP), 3 * MIM_STEP))
    mos = by_node[net.labels[("b", 0, 1)]]
    assert mos.value == pytest.approx((params.mos_esr(7 * MOS_STEP), 7 * MOS_STEP))


def test_apply_decaps_validates_layout(two_fp, params):
    net = assemble_hierarchy(two_fp, params)
    lay = DecapLayout.empty(two_fp)
    lay.mim[2, 3] = 1  # blocked cell
    with pytest.raises(LayoutViolationError):
        apply_decaps(net, lay, params)


def test_empty_layout_adds_nothing_and_is_pure(params):
    fp = two_chip_floorplan()
    net = assemble_hierarchy(fp, params)
    again = apply_decaps(net, DecapLayout.empty(fp), params)
    assert again.branch_multiset() == net.branch_multiset()
    lay = DecapLayout.saturated(fp)
    full = apply_decaps(net, lay, params)
    assert full.count("RC") == fp.n_intp + fp.n_chip
    assert net.count("RC") == 0


def test_listing_roundtrip_shape(tmp_path, toy_fp, params):
    net = assemble_hierarchy(toy_fp, params)
    path = tmp_path / "net.txt"
    net.write_listing(path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"* nodes {net.n_nodes} branches {len(net.branches)}"
    assert lines[-1].startswith("P ")
    assert len(lines) == 1 + len(net.branches) + 1


def test_branch_validation():
    with pytest.raises(ValueError):
        Branch("X", 1, 0, (1.0,))
    with pytest.raises(ValueError):
        Netlist(2, (Branch("R", 1, 2, (1.0,)),))


def test_hierarchy_is_deterministic(params):
    a = assemble_hierarchy(two_chip_floorplan(), params)
    b = assemble_hierarchy(two_chip_floorplan(), params)
    assert a.listing() == b.listing()
    assert np.array_equal(sorted(a.labels.values()), np.arange(1, a.n_nodes))
