"""CSV output with a fixed column order and round-trip float formatting."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, Sequence

import numpy as np


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def write_columns(path, columns: Dict[str, np.ndarray]) -> Path:
    """One column per key (insertion order); all arrays must have equal length."""
    names = list(columns)
    arrs = [np.asarray(columns[k]) for k in names]
    m = arrs[0].shape[0] if arrs else 0
    if any(a.shape[0] != m for a in arrs):
        raise ValueError("columns have different lengths")
    return write_csv(path, names, zip(*[a.tolist() for a in arrs]))


def sample_matrix_columns(prefix: str, x: np.ndarray, labels=None) -> Dict[str, np.ndarray]:
    """Columns ``prefix_<label>`` for a ``(replicas, n)`` array."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = labels or [str(i) for i in range(x.shape[1])]
    return {f"{prefix}_{lab}": x[:, i] for i, lab in enumerate(labels)}


def read_csv(path):
    """Header and float rows (for tests and round trips)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r]
    return header, np.array(rows)
