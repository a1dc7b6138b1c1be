"""CSV, JSON and text-dump writers for analysis and optimization artifacts.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_rows(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_impedance_csv(path, ac, target=None) -> None:
    """Columns: freq_hz, z_mag_<port> per port, then z_target if a target is given."""
    from .freq import target_impedance

    mags = np.abs(ac.z)
    header = ["freq_hz"] + [f"z_mag_{p}" for p in ac.port_names]
    cols = [ac.frequencies] + [mags[:, k] for k in range(mags.shape[1])]
    if target is not None:
        header.append("z_target")
        cols.append(np.asarray(target_impedance(target, ac.frequencies)))
    write_rows(path, header, zip(*cols))


def write_transient_csv(path, sol) -> None:
    header = ["time_s"] + list(sol.labels)
    write_rows(path, header, ([t, *row] for t, row in zip(sol.times, sol.voltages)))


def write_vvi_csv(path, report) -> None:
    write_rows(path, ["node", "vvi_vs"], zip(report.labels, report.per_node))


def vvi_grid(report, floorplan) -> dict:
    """Per-chiplet VVI matrices keyed by chiplet name (heat-map layout)."""
    by_label = dict(zip(report.labels, report.per_node))
    out = {}
    for chip in floorplan.chiplets:
        rows, cols = chip.dims
        out[chip.name] = [[float(by_label.get(f"{chip.name}_{i}_{j}", 0.0)) for j in range(cols)]
                          for i in range(rows)]
    return out


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_reward_curve(path, records) -> None:
    """records: iterable of (episode, reward, sum_c_mos_F, sum_c_mim_F, wall_s)."""
    write_rows(path, ["episode", "reward", "sum_c_mos_f", "sum_c_mim_f", "wall_s"], records)


def write_cost_history(path, history) -> None:
    write_rows(path, ["evaluation", "best_cost"], enumerate(history, start=1))


def write_tensor_dump(path, tensors) -> None:
    """Text dump: per tensor a header ``name ndim d0 d1 ...`` and one line of row-major values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            fh.write(" ".join([name, str(arr.ndim), *map(str, arr.shape)]) + "\n")
            fh.write(" ".join(repr(float(v)) for v in arr.ravel()) + "\n")


def read_tensor_dump(path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    out = {}
    for head, body in zip(lines[::2], lines[1::2]):
        parts = head.split()
        name, ndim = parts[0], int(parts[1])
        shape = tuple(int(v) for v in parts[2 : 2 + ndim])
        vals = np.array([float(v) for v in body.split()], dtype=np.float64)
        out[name] = vals.reshape(shape)
    return out


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
