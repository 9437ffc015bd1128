"""Plain-text outputs: field snapshots, energy traces and spectral coefficient dumps."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .stepper import TRACE_COLUMNS, EnergyTrace


def _g(x) -> str:
    return f"{float(x):.17g}"


def write_snapshot(path, t: float, nodes: np.ndarray, m: np.ndarray) -> None:
    """Header ``t N``, then one line ``x [y] m1 m2 m3`` per node."""
    nodes = np.asarray(nodes).reshape(len(m), -1)
    lines = [f"{_g(t)} {len(m)}"]
    lines += [" ".join(_g(v) for v in (*x, *mv)) for x, mv in zip(nodes, m)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[float, np.ndarray, np.ndarray]:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: header must be 't N'")
    t, n = float(rows[0][0]), int(rows[0][1])
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.shape[0] != n or data.shape[1] not in (4, 5):
        raise ValueError(f"{path}: expected {n} rows of 4 or 5 columns")
    return t, data[:, :-3], data[:, -3:]


def write_energy_csv(trace: EnergyTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in trace.rows():
            w.writerow([int(v) if c in ("step", "solver_iters") else _g(v) for c, v in zip(TRACE_COLUMNS, row)])


def read_energy_csv(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        cols = {c: [] for c in r.fieldnames}
        for row in r:
            for c in cols:
                cols[c].append(float(row[c]))
    return {c: np.array(v) for c, v in cols.items()}


def write_spectral_csv(traj, path) -> None:
    """Columns ``t, mode, cx, cy, cz``; one row per recorded time and mode."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mode", "cx", "cy", "cz"])
        for t, c in zip(traj.times, traj.coeffs):
            for mode, cv in enumerate(c):
                w.writerow([_g(t), mode, *(_g(v) for v in cv)])
