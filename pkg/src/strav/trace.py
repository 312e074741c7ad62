"""Iteration traces: in-memory container, CSV/JSON serialization, comparison.

A trace row at iterate k carries x^k, the steering value lambda_k, the step
norm ||x^k - x^{k-1}|| (zero at k=0), and optionally the distance to an
oracle point.  Floats are serialized with 17 significant digits, which
round-trips IEEE doubles exactly, so written traces support bitwise
comparison.  The CSV header is ``k,lambda,step_norm,oracle_dist,x_0,...``;
the JSON mirror holds the same numbers plus run metadata.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Trace",
    "GridMismatch",
    "TraceComparison",
    "record_grid",
    "write_csv",
    "write_json",
    "read_csv",
    "read_json",
    "load_trace",
    "compare_traces",
]


class GridMismatch(ValueError):
    """Two traces do not share the same recorded-k grid or dimension."""


@dataclass
class Trace:
    """Recorded rows of one solver run (row i describes iterate ks[i])."""

    ks: np.ndarray
    lambdas: np.ndarray
    step_norms: np.ndarray
    oracle_dists: np.ndarray
    xs: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ks = np.asarray(self.ks, dtype=np.int64)
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.step_norms = np.asarray(self.step_norms, dtype=float)
        self.oracle_dists = np.asarray(self.oracle_dists, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        n = self.ks.size
        if self.xs.ndim != 2 or self.xs.shape[0] != n:
            raise ValueError(f"xs must be ({n}, dim), got {self.xs.shape}")
        for name, arr in (("lambdas", self.lambdas),
                          ("step_norms", self.step_norms),
                          ("oracle_dists", self.oracle_dists)):
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
        if n and np.any(np.diff(self.ks) <= 0):
            raise ValueError("trace ks must be strictly increasing")
        if np.any(self.step_norms < 0.0):
            raise ValueError("step norms must be nonnegative")

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def n_rows(self) -> int:
        return self.ks.size

    @property
    def final_x(self) -> np.ndarray:
        return self.xs[-1].copy()

    def row_at(self, k: int) -> dict:
        idx = np.flatnonzero(self.ks == k)
        if idx.size == 0:
            raise KeyError(f"no recorded row at k={k}")
        i = int(idx[0])
        od = float(self.oracle_dists[i])
        return {
            "k": int(self.ks[i]),
            "lambda": float(self.lambdas[i]),
            "step_norm": float(self.step_norms[i]),
            "oracle_dist": None if np.isnan(od) else od,
            "x": self.xs[i].copy(),
        }


def record_grid(max_iter: int, record_every: int) -> np.ndarray:
    """Recorded ks: 0, every record_every-th step, and max_iter."""
    max_iter = int(max_iter)
    record_every = int(record_every)
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every}")
    ks = np.arange(0, max_iter + 1, record_every, dtype=np.int64)
    if ks[-1] != max_iter:
        ks = np.append(ks, max_iter)
    return ks


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _csv_header(dim: int) -> list[str]:
    return ["k", "lambda", "step_norm", "oracle_dist"] + [f"x_{i}" for i in range(dim)]


def write_csv(trace: Trace, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_csv_header(trace.dim))
        for i in range(trace.n_rows):
            od = trace.oracle_dists[i]
            w.writerow(
                [str(int(trace.ks[i])), _fmt(trace.lambdas[i]),
                 _fmt(trace.step_norms[i]),
                 "" if np.isnan(od) else _fmt(od)]
                + [_fmt(v) for v in trace.xs[i]]
            )


def write_json(trace: Trace, path) -> None:
    rows = []
    for i in range(trace.n_rows):
        od = float(trace.oracle_dists[i])
        rows.append({
            "k": int(trace.ks[i]),
            "lambda": float(trace.lambdas[i]),
            "step_norm": float(trace.step_norms[i]),
            "oracle_dist": None if np.isnan(od) else od,
            "x": [float(v) for v in trace.xs[i]],
        })
    doc = {"metadata": trace.metadata, "rows": rows}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_csv(path) -> Trace:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:4] != ["k", "lambda", "step_norm", "oracle_dist"]:
            raise ValueError(f"{path}: not a trace CSV (header {header[:4]})")
        dim = len(header) - 4
        ks, lams, sns, ods, xs = [], [], [], [], []
        for row in r:
            ks.append(int(row[0]))
            lams.append(float(row[1]))
            sns.append(float(row[2]))
            ods.append(float(row[3]) if row[3] else np.nan)
            xs.append([float(v) for v in row[4:]])
    return Trace(
        np.array(ks, dtype=np.int64), np.array(lams), np.array(sns),
        np.array(ods), np.array(xs, dtype=float).reshape(len(ks), dim),
    )


def read_json(path) -> Trace:
    with open(path) as fh:
        doc = json.load(fh)
    rows = doc["rows"]
    ks = np.array([r["k"] for r in rows], dtype=np.int64)
    lams = np.array([r["lambda"] for r in rows], dtype=float)
    sns = np.array([r["step_norm"] for r in rows], dtype=float)
    ods = np.array(
        [np.nan if r["oracle_dist"] is None else r["oracle_dist"] for r in rows],
        dtype=float,
    )
    xs = np.array([r["x"] for r in rows], dtype=float)
    return Trace(ks, lams, sns, ods, xs.reshape(len(rows), -1),
                 metadata=doc.get("metadata", {}))


def load_trace(path) -> Trace:
    p = str(path)
    if p.endswith(".json"):
        return read_json(path)
    return read_csv(path)


@dataclass(frozen=True)
class TraceComparison:
    max_diff: float
    at_k: int
    rows: int


def compare_traces(a: Trace, b: Trace) -> TraceComparison:
    """Max over rows of ||x_A - x_B||_inf; requires identical k-grids and dims."""
    if a.dim != b.dim:
        raise GridMismatch(f"trace dims differ: {a.dim} vs {b.dim}")
    if not np.array_equal(a.ks, b.ks):
        raise GridMismatch(
            f"trace k-grids differ ({a.n_rows} rows vs {b.n_rows}; "
            "grids must be identical)"
        )
    if a.n_rows == 0:
        return TraceComparison(0.0, 0, 0)
    diffs = np.max(np.abs(a.xs - b.xs), axis=1)
    i = int(np.argmax(diffs))
    return TraceComparison(float(diffs[i]), int(a.ks[i]), a.n_rows)
