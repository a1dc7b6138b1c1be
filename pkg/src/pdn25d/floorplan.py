"""Floorplans and decap layouts.

A floorplan is UDC-granular: one interposer grid of UDCs, chiplets placed
on top of it at integer offsets, binary space matrices marking where a
decap may go, TSV sites on the interposer, I/O current sites on chiplet
edges and probing ports on chiplets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidFloorplanError, LayoutViolationError
from .params import MIM_STEP, MOS_STEP, N_LEVELS

Coord = tuple[int, int]


def _as_binary(matrix, dims: Coord, what: str) -> np.ndarray:
    arr = np.asarray(matrix)
    if arr.shape != tuple(dims):
        raise InvalidFloorplanError(f"{what}: shape {arr.shape} does not match dims {tuple(dims)}")
    if not np.isin(arr, (0, 1)).all():
        raise InvalidFloorplanError(f"{what}: entries must be 0 or 1")
    out = arr.astype(np.int8)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Chiplet:
    name: str
    origin: Coord
    dims: Coord
    space: np.ndarray = field(repr=False)
    io_sites: tuple[Coord, ...] = ()

    def covers(self, row: int, col: int) -> bool:
        r0, c0 = self.origin
        return r0 <= row < r0 + self.dims[0] and c0 <= col < c0 + self.dims[1]


@dataclass(frozen=True)
class Port:
    chiplet: str
    row: int
    col: int

    @property
    def label(self) -> str:
        return f"{self.chiplet}_{self.row}_{self.col}"


class Floorplan:
    def __init__(
        self,
        interposer_dims: Coord,
        chiplets: list[Chiplet] | tuple[Chiplet, ...] = (),
        interposer_space=None,
        tsv_sites: list[Coord] | tuple[Coord, ...] = (),
        probe_ports: list[Port] | tuple[Port, ...] = (),
    ):
        rows, cols = (int(v) for v in interposer_dims)
        if rows < 1 or cols < 1:
            raise InvalidFloorplanError(f"interposer dims must be >= 1, got {(rows, cols)}")
        self.interposer_dims: Coord = (rows, cols)
        if interposer_space is None:
            interposer_space = np.ones((rows, cols), dtype=np.int8)
        self.interposer_space = _as_binary(interposer_space, self.interposer_dims, "interposer_space")

        chips = []
        seen = set()
        for chip in chiplets:
            if chip.name in seen:
                raise InvalidFloorplanError(f"duplicate chiplet name {chip.name!r}")
            seen.add(chip.name)
            cr, cc = chip.dims
            if cr < 1 or cc < 1:
                raise InvalidFloorplanError(f"chiplet {chip.name!r}: dims must be >= 1")
            r0, c0 = chip.origin
            if r0 < 0 or c0 < 0 or r0 + cr > rows or c0 + cc > cols:
                raise InvalidFloorplanError(f"chiplet {chip.name!r} lies outside the interposer")
            space = _as_binary(chip.space, chip.dims, f"chiplet {chip.name!r} space")
            for site in chip.io_sites:
                if not (0 <= site[0] < cr and 0 <= site[1] < cc):
                    raise InvalidFloorplanError(f"chiplet {chip.name!r}: io site {site} out of range")
            chips.append(
                Chiplet(chip.name, (r0, c0), (cr, cc), space, tuple(tuple(s) for s in chip.io_sites))
            )
        occupied = np.zeros((rows, cols), dtype=np.int32)
        for chip in chips:
            r0, c0 = chip.origin
            occupied[r0 : r0 + chip.dims[0], c0 : c0 + chip.dims[1]] += 1
        if (occupied > 1).any():
            raise InvalidFloorplanError("chiplet footprints overlap")
        self.chiplets: tuple[Chiplet, ...] = tuple(chips)

        sites = []
        for site in tsv_sites:
            r, c = (int(v) for v in site)
            if not (0 <= r < rows and 0 <= c < cols):
                raise InvalidFloorplanError(f"tsv site {(r, c)} out of range")
            sites.append((r, c))
        if len(set(sites)) != len(sites):
            raise InvalidFloorplanError("duplicate tsv sites")
        self.tsv_sites: tuple[Coord, ...] = tuple(sites)

        by_name = {c.name: c for c in self.chiplets}
        for port in probe_ports:
            chip = by_name.get(port.chiplet)
            if chip is None:
                raise InvalidFloorplanError(f"probe port references unknown chiplet {port.chiplet!r}")
            if not (0 <= port.row < chip.dims[0] and 0 <= port.col < chip.dims[1]):
                raise InvalidFloorplanError(f"probe port {port} out of range")
        self.probe_ports: tuple[Port, ...] = tuple(probe_ports)

    def chiplet(self, name: str) -> Chiplet:
        for chip in self.chiplets:
            if chip.name == name:
                return chip
        raise KeyError(name)

    @property
    def n_intp(self) -> int:
        return int(self.interposer_space.sum())

    @property
    def n_chip(self) -> int:
        return int(sum(c.space.sum() for c in self.chiplets))

    def max_mim(self) -> float:
        return self.n_intp * N_LEVELS * MIM_STEP

    def max_mos(self) -> float:
        return self.n_chip * N_LEVELS * MOS_STEP


@dataclass
class DecapLayout:
    """Integer decap levels (0..10) per UDC for the interposer and each chiplet."""

    mim: np.ndarray
    mos: dict[str, np.ndarray]

    @classmethod
    def empty(cls, fp: Floorplan) -> DecapLayout:
        return cls(
            np.zeros(fp.interposer_dims, dtype=np.int64),
            {c.name: np.zeros(c.dims, dtype=np.int64) for c in fp.chiplets},
        )

    @classmethod
    def saturated(cls, fp: Floorplan) -> DecapLayout:
        return cls(
            fp.interposer_space.astype(np.int64) * N_LEVELS,
            {c.name: c.space.astype(np.int64) * N_LEVELS for c in fp.chiplets},
        )

    def copy(self) -> DecapLayout:
        return DecapLayout(self.mim.copy(), {k: v.copy() for k, v in self.mos.items()})

    def validate(self, fp: Floorplan) -> None:
        if self.mim.shape != fp.interposer_dims:
            raise LayoutViolationError(f"mim grid shape {self.mim.shape} != {fp.interposer_dims}")
        if set(self.mos) != {c.name for c in fp.chiplets}:
            raise LayoutViolationError("mos grids must cover exactly the floorplan's chiplets")
        grids = [("interposer", self.mim, fp.interposer_space)]
        grids += [(c.name, self.mos[c.name], c.space) for c in fp.chiplets]
        for name, levels, space in grids:
            if levels.shape != space.shape:
                raise LayoutViolationError(f"{name}: level grid shape {levels.shape} != {space.shape}")
            if (levels < 0).any() or (levels > N_LEVELS).any():
                raise LayoutViolationError(f"{name}: levels must lie in 0..{N_LEVELS}")
            bad = np.argwhere((levels > 0) & (space == 0))
            if len(bad):
                r, c = bad[0]
                raise LayoutViolationError(f"{name}: decap at non-feasible UDC ({r}, {c})")

    def total_mim(self) -> float:
        return float(self.mim.sum()) * MIM_STEP

    def total_mos(self) -> float:
        return float(sum(v.sum() for v in self.mos.values())) * MOS_STEP

    # flat gene / action ordering: interposer feasible UDCs row-major, then each
    # chiplet's feasible UDCs row-major in floorplan order
    def to_vector(self, fp: Floorplan, include_mim: bool = True) -> np.ndarray:
        parts = []
        if include_mim:
            parts.append(self.mim[fp.interposer_space == 1])
        parts += [self.mos[c.name][c.space == 1] for c in fp.chiplets]
        return np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, np.int64)

    def with_vector(self, fp: Floorplan, vec: np.ndarray, include_mim: bool = True) -> DecapLayout:
        out = self.copy()
        vec = np.asarray(vec, dtype=np.int64)
        n_total = len(self.to_vector(fp, include_mim))
        if vec.shape != (n_total,):
            raise LayoutViolationError(f"vector shape {vec.shape} != ({n_total},) feasible UDCs")
        pos = 0
        if include_mim:
            mask = fp.interposer_space == 1
            n = int(mask.sum())
            out.mim[mask] = vec[pos : pos + n]
            pos += n
        for chip in fp.chiplets:
            mask = chip.space == 1
            n = int(mask.sum())
            out.mos[chip.name][mask] = vec[pos : pos + n]
            pos += n
        return out

    def to_json_obj(self) -> dict:
        return {
            "mim": self.mim.astype(int).tolist(),
            "mos": {k: v.astype(int).tolist() for k, v in self.mos.items()},
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> DecapLayout:
        if set(obj) != {"mim", "mos"}:
            raise LayoutViolationError('layout JSON must have exactly the keys "mim" and "mos"')
        return cls(
            np.asarray(obj["mim"], dtype=np.int64),
            {k: np.asarray(v, dtype=np.int64) for k, v in obj["mos"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> DecapLayout:
        return cls.from_json_obj(json.loads(Path(path).read_text()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DecapLayout):
            return NotImplemented
        return (
            np.array_equal(self.mim, other.mim)
            and self.mos.keys() == other.mos.keys()
            and all(np.array_equal(v, other.mos[k]) for k, v in self.mos.items())
        )
