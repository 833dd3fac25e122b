"""Space-filling experimental designs on bounded input boxes.

Latin hypercube designs with uniform within-stratum placement, optionally
improved by random restarts plus column-element swap hill climbing on the
minimum pairwise distance (maximin criterion).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

__all__ = [
    "InputBox",
    "DesignMatrix",
    "lhd_sample",
    "maximin_lhd",
    "scale_to_box",
    "normalize_to_unit",
    "min_pairwise_distance",
]

_MAX_SWEEPS = 8


@dataclass(frozen=True)
class InputBox:
    """Axis-aligned box of simulator inputs, one (lower, upper) pair per dimension."""

    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d arrays of equal positive length")
        if not np.all(lower < upper):
            raise ValueError("every lower bound must lie strictly below its upper bound")
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            object.__setattr__(self, "names", names)
            if len(names) != lower.size:
                raise ValueError("names must match the box dimension")

    @property
    def dims(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class DesignMatrix:
    """n x d matrix of design points.

    ``normalized`` is True while the points live in [0, 1]^d and False once
    they have been mapped to box coordinates.
    """

    points: np.ndarray
    normalized: bool

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("design points must form a 2-d array")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _check_size(n: int, d: int) -> None:
    if n < 2:
        raise ValueError(f"a design needs at least 2 points, got n={n}")
    if d < 1:
        raise ValueError(f"a design needs at least 1 dimension, got d={d}")


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest Euclidean distance between any two rows of ``points``."""
    return float(pdist(np.asarray(points, dtype=float)).min())


def lhd_sample(n: int, d: int, seed: int) -> DesignMatrix:
    """Draw a Latin hypercube design on [0, 1]^d.

    Every column contains exactly one point in each of the n equal-width
    strata [i/n, (i+1)/n); placement inside a stratum is uniform.  The result
    is a deterministic function of (n, d, seed).
    """
    _check_size(n, d)
    rng = np.random.default_rng(seed)
    pts = np.empty((n, d))
    for j in range(d):
        pts[:, j] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return DesignMatrix(points=pts, normalized=True)


def _swap_hill_climb(pts: np.ndarray) -> np.ndarray:
    """Improve min pairwise distance by swapping column elements between rows.

    First-improvement sweeps over all (column, row pair) swaps; a swap is kept
    only if it strictly increases the minimum distance, so the criterion never
    decreases.  Deterministic for a given input.
    """
    pts = pts.copy()
    n, d = pts.shape
    # squared distance matrix with an inf diagonal so row minima are pairwise
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    best = d2.min()

    for _ in range(_MAX_SWEEPS):
        improved = False
        for k in range(d):
            for i in range(n - 1):
                for j in range(i + 1, n):
                    if pts[i, k] == pts[j, k]:
                        continue
                    pts[i, k], pts[j, k] = pts[j, k], pts[i, k]
                    row_i = ((pts - pts[i]) ** 2).sum(axis=1)
                    row_j = ((pts - pts[j]) ** 2).sum(axis=1)
                    row_i[i] = np.inf
                    row_j[j] = np.inf
                    mask = np.ones(n, dtype=bool)
                    mask[[i, j]] = False
                    others = d2[np.ix_(mask, mask)].min() if n > 2 else np.inf
                    cand = min(others, row_i.min(), row_j.min())
                    if cand > best:
                        best = cand
                        d2[i, :] = row_i
                        d2[:, i] = row_i
                        d2[j, :] = row_j
                        d2[:, j] = row_j
                        d2[i, i] = d2[j, j] = np.inf
                        improved = True
                    else:
                        pts[i, k], pts[j, k] = pts[j, k], pts[i, k]
        if not improved:
            break
    return pts


def maximin_lhd(n: int, d: int, seed: int, restarts: int = 10) -> DesignMatrix:
    """Maximin-improved Latin hypercube design on [0, 1]^d.

    Generates ``restarts`` stratified designs (restart r uses seed + r, so
    restart 0 starts from ``lhd_sample(n, d, seed)``), hill-climbs each by
    column-element swaps, and keeps the candidate with the largest minimum
    pairwise distance.  Ties keep the earliest candidate.
    """
    _check_size(n, d)
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    best_pts = None
    best_dist = -np.inf
    for r in range(restarts):
        cand = _swap_hill_climb(lhd_sample(n, d, seed + r).points)
        dist = min_pairwise_distance(cand)
        if dist > best_dist:
            best_dist = dist
            best_pts = cand
    return DesignMatrix(points=best_pts, normalized=True)


def scale_to_box(design: DesignMatrix, box: InputBox) -> DesignMatrix:
    """Map a normalized design onto box coordinates, column by column."""
    if not design.normalized:
        raise ValueError("design is already in box coordinates")
    if design.d != box.dims:
        raise ValueError(f"design has {design.d} columns but the box has {box.dims}")
    pts = box.lower + design.points * box.span
    return DesignMatrix(points=pts, normalized=False)


def normalize_to_unit(design: DesignMatrix, box: InputBox) -> DesignMatrix:
    """Inverse of :func:`scale_to_box`."""
    if design.normalized:
        raise ValueError("design is already normalized")
    if design.d != box.dims:
        raise ValueError(f"design has {design.d} columns but the box has {box.dims}")
    pts = (design.points - box.lower) / box.span
    return DesignMatrix(points=pts, normalized=True)
