"""Optimality and convergence measurement: hypervolume, generation of
convergence, convergence time, and correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Reference point in normalized objective space; slightly beyond the unit
# nadir so boundary points contribute nonzero volume.
DEFAULT_REFERENCE = 1.1

# Convergence-margin rules: best-value histories use a 0.05 band over a
# 20-generation window; hypervolume histories use a 1.0e-4 band.
SOOP_GC_WINDOW = 20
SOOP_GC_MARGIN = 0.05
MOOP_GC_MARGIN = 1.0e-4


@dataclass(frozen=True)
class ConvergenceReport:
    gc: int
    ng: int
    rt: float

    @property
    def ct(self) -> float:
        return convergence_time(self.gc, self.ng, self.rt)


def _nondominated_mask(points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    le = np.all(points[:, None, :] <= points[None, :, :], axis=2)
    lt = np.any(points[:, None, :] < points[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)
    return ~dominated


def hv2d(points: np.ndarray, ref: np.ndarray) -> float:
    """Exact 2-D hypervolume by a sorted sweep (minimization)."""
    pts = points[np.all(points < ref, axis=1)]
    if pts.size == 0:
        return 0.0
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    area = 0.0
    best_y = ref[1]
    for x, y in pts:
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return float(area)


def hv3d(points: np.ndarray, ref: np.ndarray) -> float:
    """Exact 3-D hypervolume by slicing along the third objective.

    Sort on z; between consecutive z-levels the dominated cross-section is
    the 2-D hypervolume of all points at or below the slice.
    """
    pts = points[np.all(points < ref, axis=1)]
    if pts.size == 0:
        return 0.0
    order = np.argsort(pts[:, 2], kind="stable")
    pts = pts[order]
    zs = pts[:, 2]
    volume = 0.0
    for i in range(len(pts)):
        z_next = zs[i + 1] if i + 1 < len(pts) else ref[2]
        if z_next > zs[i]:
            area = hv2d(pts[: i + 1, :2], ref[:2])
            volume += area * (z_next - zs[i])
    return float(volume)


def hv_monte_carlo(points: np.ndarray, ref: np.ndarray, samples: int = 1_000_000,
                   seed: int = 0) -> float:
    """Monte-Carlo hypervolume estimate over the box [min(points), ref]."""
    pts = points[np.all(points < ref, axis=1)]
    if pts.size == 0:
        return 0.0
    lower = pts.min(axis=0)
    box = np.prod(ref - lower)
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = 100_000
    remaining = samples
    while remaining > 0:
        n = min(chunk, remaining)
        draws = rng.uniform(lower, ref, size=(n, len(ref)))
        covered = np.zeros(n, dtype=bool)
        for p in pts:
            covered |= np.all(draws >= p, axis=1)
        hits += int(covered.sum())
        remaining -= n
    return float(box * hits / samples)


def hypervolume(points, ref=None, *, normalization: tuple | None = None,
                mc_samples: int = 1_000_000, mc_seed: int = 0) -> float:
    """Hypervolume of a minimization set against a reference point.

    ``normalization`` is an optional (lower, upper) pair of per-objective
    bounds; objectives are min-max scaled with it before measuring, and the
    reference defaults to (1.1, ..., 1.1) in the normalized space.  Exact for
    2 and 3 objectives; Monte-Carlo (mc_samples draws) beyond that.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    if points.ndim == 1:
        points = points[:, None]
    m = points.shape[1]
    if normalization is not None:
        lo, hi = (np.asarray(a, dtype=float) for a in normalization)
        span = np.where(hi > lo, hi - lo, 1.0)
        points = (points - lo) / span
    if ref is None:
        ref = np.full(m, DEFAULT_REFERENCE)
    ref = np.asarray(ref, dtype=float)
    if ref.shape != (m,):
        raise ValueError("reference point dimension mismatch")
    if m == 1:
        best = points.min()
        return float(max(ref[0] - best, 0.0))
    if m == 2:
        return hv2d(points, ref)
    if m == 3:
        return hv3d(points, ref)
    return hv_monte_carlo(points, ref, samples=mc_samples, seed=mc_seed)


def hypervolume_history(snapshots: list, ref=None) -> list:
    """Per-generation hypervolume of rank-0 snapshots under one shared
    normalization (per-objective min/max over the union of all snapshots)."""
    stacks = [np.asarray(s, dtype=float) for s in snapshots if np.asarray(s).size]
    if not stacks:
        return [0.0 for _ in snapshots]
    union = np.vstack(stacks)
    lo, hi = union.min(axis=0), union.max(axis=0)
    return [
        hypervolume(s, ref, normalization=(lo, hi)) if np.asarray(s).size else 0.0
        for s in snapshots
    ]


def generation_of_convergence(history, window: int, margin: float) -> int:
    """First generation (1-based) whose value band stays within ``margin``
    through the end of the history, provided at least ``window`` generations
    remain; returns the history length if the band never settles."""
    history = np.asarray(history, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    ng = history.size
    if ng == 0:
        raise ValueError("history must be non-empty")
    suffix_max = np.maximum.accumulate(history[::-1])[::-1]
    suffix_min = np.minimum.accumulate(history[::-1])[::-1]
    for g in range(ng - window + 1):
        if suffix_max[g] - suffix_min[g] <= margin:
            return g + 1
    return ng


def convergence_time(gc: int, ng: int, rt: float) -> float:
    """CT = GC / NG * RT."""
    if not (1 <= gc <= ng):
        raise ValueError("GC must lie in [1, NG]")
    if rt < 0:
        raise ValueError("RT must be non-negative")
    return gc / ng * rt


def pearson_correlation(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValueError("inputs must be equally sized and non-empty")
    if np.std(x) == 0 or np.std(y) == 0:
        raise ValueError("correlation undefined for zero-variance input")
    return float(np.corrcoef(x, y)[0, 1])
