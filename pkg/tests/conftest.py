from __future__ import annotations

import numpy as np
import pytest

from pdn25d.floorplan import Chiplet, DecapLayout, Floorplan, Port
from pdn25d.freq import TargetImpedanceSpec
from pdn25d.mna import default_frequencies
from pdn25d.params import ROCKET64_55NM

TOY_IO = [(0, 0), (0, 1), (1, 0), (1, 1)] * 3 + [(0, 0)]


def toy_floorplan(tsvs=((0, 0),)) -> Floorplan:
    chip = Chiplet("c0", (0, 0), (2, 2), np.ones((2, 2)), TOY_IO)
    return Floorplan((2, 2), [chip], None, list(tsvs), [Port("c0", 1, 1)])


def two_chip_floorplan() -> Floorplan:
    """3x4 interposer with two 2x2 chiplets and a blocked interposer cell."""
    space = np.ones((3, 4))
    space[2, 3] = 0
    chips = [
        Chiplet("a", (0, 0), (2, 2), np.array([[1, 1], [0, 1]]), [(0, 1), (1, 1)]),
        Chiplet("b", (1, 2), (2, 2), np.ones((2, 2)), [(0, 0)]),
    ]
    return Floorplan((3, 4), chips, space, [(0, 0), (2, 0)], [Port("a", 1, 1), Port("b", 0, 1)])


@pytest.fixture
def params():
    return ROCKET64_55NM.with_overrides({"mim_esr_per_f": 10e-12})


@pytest.fixture
def toy_fp():
    return toy_floorplan()


@pytest.fixture
def two_fp():
    return two_chip_floorplan()


@pytest.fixture
def toy_target():
    return TargetImpedanceSpec.from_flat(1.0, 0.05, 0.045, 3.4e9)


@pytest.fixture
def coarse_freqs():
    return default_frequencies(0.1e9, 20e9, 10)


def random_layout(fp: Floorplan, rng) -> DecapLayout:
    lay = DecapLayout.empty(fp)
    vec = rng.integers(0, 11, len(lay.to_vector(fp)))
    return lay.with_vector(fp, vec)
