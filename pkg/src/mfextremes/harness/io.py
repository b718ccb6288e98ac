"""CSV persistence for endpoints, point patterns, weights and norming constants.

Floats are written with 17 significant digits, which round-trips IEEE doubles.
Rows are always ordered by replication id, then particle index, so a file is
a pure function of its data.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Union

import numpy as np

from ..extremes import NormingConstants

__all__ = [
    "read_endpoints_csv",
    "read_intermediate_csv",
    "read_norming_csv",
    "read_patterns_csv",
    "read_weights_csv",
    "write_endpoints_csv",
    "write_intermediate_csv",
    "write_norming_csv",
    "write_patterns_csv",
    "write_weights_csv",
]

PathLike = Union[str, Path]


def _write_table(path: PathLike, header: str, first, second, third) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        fh.write("".join(f"{a},{b},{c:.17g}\n" for a, b, c in zip(first, second, third)))


def write_endpoints_csv(path: PathLike, endpoints: np.ndarray) -> None:
    """``endpoints`` is ``(R, N)``; rows ``replication_id, particle_index, x_T`` with 1-based particles."""
    endpoints = np.asarray(endpoints, dtype=float)
    r, n = endpoints.shape
    reps = np.repeat(np.arange(r), n)
    idx = np.tile(np.arange(1, n + 1), r)
    _write_table(path, "replication_id,particle_index,x_T", reps, idx, endpoints.ravel().tolist())


def _read_grid(path: PathLike, value_column: int = 2):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    reps = data[:, 0].astype(np.int64)
    r = int(reps.max()) + 1
    n = data.shape[0] // r
    if n * r != data.shape[0]:
        raise ValueError(f"{path}: ragged table ({data.shape[0]} rows for {r} replications)")
    return data[:, value_column].reshape(r, n)


def read_endpoints_csv(path: PathLike) -> np.ndarray:
    return _read_grid(path)


def write_patterns_csv(path: PathLike, normalized: np.ndarray) -> None:
    """Rows ``replication_id, index_fraction, normalized_value`` for ``(R, N)`` normalised endpoints."""
    normalized = np.asarray(normalized, dtype=float)
    r, n = normalized.shape
    fractions = [f"{v:.17g}" for v in np.arange(1, n + 1) / n]
    reps = np.repeat(np.arange(r), n)
    _write_table(
        path,
        "replication_id,index_fraction,normalized_value",
        reps,
        fractions * r,
        normalized.ravel().tolist(),
    )


def read_patterns_csv(path: PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Returns ``(index_fractions (N,), values (R, N))``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = _read_grid(path)
    return data[: values.shape[1], 1], values


def write_weights_csv(path: PathLike, log_weight, martingale, quad_variation) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("replication_id,log_weight,M,quad_variation\n")
        fh.write(
            "".join(
                f"{i},{lw:.17g},{m:.17g},{q:.17g}\n"
                for i, (lw, m, q) in enumerate(zip(log_weight, martingale, quad_variation))
            )
        )


def read_weights_csv(path: PathLike) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {"log_weight": data[:, 1], "martingale": data[:, 2], "quad_variation": data[:, 3]}


def write_intermediate_csv(path: PathLike, table: dict) -> None:
    """``table`` maps particle count N to the (R,) normalised k(N)-th order statistics."""
    with open(path, "w", newline="") as fh:
        fh.write("n_particles,replication_id,kth_normalized\n")
        for n in sorted(table):
            fh.write("".join(f"{n},{i},{v:.17g}\n" for i, v in enumerate(np.asarray(table[n]).tolist())))


def read_intermediate_csv(path: PathLike) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = {}
    for n in np.unique(data[:, 0]).astype(int):
        rows = data[data[:, 0] == n]
        out[int(n)] = rows[np.argsort(rows[:, 1]), 2]
    return out


def write_norming_csv(path: PathLike, norming: NormingConstants) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["a", "b", "n", "source", "method"])
        w.writerow([f"{norming.a:.17g}", f"{norming.b:.17g}", norming.n, norming.source, norming.method])


def read_norming_csv(path: PathLike) -> NormingConstants:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    a, b, n, source, method = rows[1]
    return NormingConstants(a=float(a), b=float(b), n=int(n), source=source, method=method)
