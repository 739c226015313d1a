"""Fiber-field and activation-map comparison measures."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, DimensionError

N_BINS = 64
QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def _fibers(F):
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 3:
        F = F[:, :, 0]
    if F.ndim != 2 or F.shape[1] != 3:
        raise DimensionError(f"expected (N, 3) fibers or (N, 3, 3) frames, got shape {F.shape}")
    n = np.linalg.norm(F, axis=1, keepdims=True)
    return F / np.where(n > 0, n, 1.0)


def fiber_diff(F1, F2):
    """Per-node 1 - |f1 . f2| in [0, 1]; accepts fiber vectors or frames."""
    f1, f2 = _fibers(F1), _fibers(F2)
    if f1.shape != f2.shape:
        raise DimensionError(f"fiber fields have {len(f1)} and {len(f2)} nodes")
    return np.clip(1.0 - np.abs(np.einsum("ij,ij->i", f1, f2)), 0.0, 1.0)


@dataclass
class ActivationDiff:
    delta: np.ndarray  # |A1 - A2| per node, ms
    M: float
    M_pct: float  # M / A_max
    A_max: float
    argmax: int


def activation_diff(A1, A2, A_max=None):
    """Per-node |A1 - A2|, its maximum M and M% = M / A_max, where A_max
    defaults to the latest activation time over both maps."""
    A1 = np.asarray(A1, dtype=np.float64)
    A2 = np.asarray(A2, dtype=np.float64)
    if A1.shape != A2.shape:
        raise DimensionError(f"activation maps have {A1.size} and {A2.size} entries")
    bad = np.flatnonzero(~np.isfinite(A1) | ~np.isfinite(A2))
    if len(bad):
        raise CoverageError(f"{len(bad)} node(s) never activated, first {bad[:10].tolist()}", bad)
    d = np.abs(A1 - A2)
    if A_max is None:
        A_max = float(max(A1.max(), A2.max()))
    i = int(np.argmax(d)) if d.size else 0
    M = float(d[i]) if d.size else 0.0
    return ActivationDiff(delta=d, M=M, M_pct=M / A_max if A_max > 0 else 0.0, A_max=float(A_max), argmax=i)


def summary(values):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    out = {"n": int(v.size), "max": float(v.max()) if v.size else np.nan, "mean": float(v.mean()) if v.size else np.nan}
    for q in QUANTILES:
        out[f"q{int(round(q * 100)):02d}"] = float(np.quantile(v, q)) if v.size else np.nan
    return out


def histogram(values, upper=None, bins=N_BINS):
    """Counts over ``bins`` uniform bins on [0, upper]; ``upper`` defaults to
    1 for fiber differences."""
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    upper = 1.0 if upper is None else float(upper)
    if upper <= 0:
        upper = 1.0
    return np.histogram(v, bins=bins, range=(0.0, upper))


def display_mask(diff, threshold=0.25):
    """Copy of ``diff`` with values below ``threshold`` set to NaN, for
    export only."""
    d = np.array(diff, dtype=np.float64)
    d[d < threshold] = np.nan
    return d


def region_means(values, masks):
    return {name: float(np.mean(values[m])) if np.any(m) else np.nan for name, m in masks.items()}


def write_summary_csv(path, rows):
    """``rows``: mapping name -> summary dict (same keys)."""
    rows = dict(rows)
    keys = list(next(iter(rows.values())).keys()) if rows else []
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["name"] + keys)
        for name, s in rows.items():
            wr.writerow([name] + [f"{s[k]:.9g}" if isinstance(s[k], float) else s[k] for k in keys])


def write_histogram_csv(path, counts, edges):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lo", "hi", "count"])
        for c, a, b in zip(counts, edges[:-1], edges[1:]):
            wr.writerow([f"{a:.9g}", f"{b:.9g}", int(c)])
