"""Weighted isotonic projection of gridded functions.

The workhorse is a left-to-right pool adjacent violators (PAV) pass over a
stack of blocks, compiled with numba.  ``minmax_oracle`` evaluates the
inf-sup block-average formula directly and exists to check it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

__all__ = [
    "GridFunction",
    "MonotoneGridFunction",
    "isotonic",
    "isotonic_along",
    "pava_project",
    "minmax_oracle",
    "sup_distance",
    "weighted_l2_distance",
]


@dataclass(frozen=True)
class GridFunction:
    """Values of a function on a strictly increasing 1D grid.

    Attributes:
      points: strictly increasing abscissae.
      values: one finite value per point.
      weights: strictly positive masses, all ones by default.
    """

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if points.ndim != 1 or values.ndim != 1:
            raise ValueError("points and values must be 1D")
        if len(points) == 0:
            raise ValueError("grid function must have at least one point")
        if len(points) != len(values):
            raise ValueError(
                f"points ({len(points)}) and values ({len(values)}) differ in length")
        if not np.all(np.isfinite(points)):
            raise ValueError("points must be finite")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if np.any(np.diff(points) <= 0):
            raise ValueError("points must be strictly increasing")
        if self.weights is None:
            weights = np.ones_like(values)
        else:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != values.shape:
                raise ValueError("weights must have the same length as values")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("weights must be finite and strictly positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.points)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.points, values, self.weights)

    def is_monotone(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))


@dataclass(frozen=True)
class MonotoneGridFunction(GridFunction):
    """A GridFunction whose values are non-decreasing."""

    tol_mono: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not self.is_monotone(self.tol_mono):
            raise ValueError("values are not non-decreasing")


@numba.njit(cache=True)
def _pav_kernel(y, w, out):
    n = y.shape[0]
    level = np.empty(n)
    mass = np.empty(n)
    start = np.empty(n + 1, dtype=np.int64)
    k = -1
    for i in range(n):
        k += 1
        level[k] = y[i]
        mass[k] = w[i]
        start[k] = i
        # pool on strict violation only
        while k > 0 and level[k - 1] > level[k]:
            total = mass[k - 1] + mass[k]
            level[k - 1] = level[k - 1] + (level[k] - level[k - 1]) * (mass[k] / total)
            mass[k - 1] = total
            k -= 1
    start[k + 1] = n
    for b in range(k + 1):
        for i in range(start[b], start[b + 1]):
            out[i] = level[b]


@numba.njit(cache=True)
def _pav_rows(y, w, out):
    for r in range(y.shape[0]):
        _pav_kernel(y[r], w[r], out[r])


def _check_line(values, weights):
    values = np.ascontiguousarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot project an empty sequence")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    if weights is None:
        weights = np.ones_like(values)
    else:
        weights = np.ascontiguousarray(np.broadcast_to(weights, values.shape), dtype=float)
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("weights must be finite and strictly positive")
    return values, weights


def isotonic(values, weights=None) -> np.ndarray:
    """Weighted least-squares non-decreasing fit to a 1D sequence.

    Returns the minimizer of ``sum(weights * (values - F)**2)`` over
    non-decreasing ``F``.  Every output value is the weighted mean of the
    input values in its pooled block.
    """
    values, weights = _check_line(values, weights)
    if values.ndim != 1:
        raise ValueError("isotonic expects a 1D sequence; use isotonic_along")
    out = np.empty_like(values)
    _pav_kernel(values, weights, out)
    return out


def isotonic_along(values, axis: int = -1, weights=None) -> np.ndarray:
    """Apply :func:`isotonic` independently to every line along ``axis``.

    ``weights`` must broadcast to ``values``; each line uses its own slice.
    """
    values, weights = _check_line(values, weights)
    if values.ndim == 1:
        out = np.empty_like(values)
        _pav_kernel(values, weights, out)
        return out
    v = np.moveaxis(values, axis, -1)
    shape = v.shape
    v = np.ascontiguousarray(v.reshape(-1, shape[-1]))
    w = np.ascontiguousarray(np.moveaxis(weights, axis, -1).reshape(-1, shape[-1]))
    out = np.empty_like(v)
    _pav_rows(v, w, out)
    return np.moveaxis(out.reshape(shape), -1, axis)


def pava_project(f: GridFunction) -> MonotoneGridFunction:
    """Project ``f`` onto the non-decreasing functions on its grid.

    The projection is with respect to the ``f.weights``-weighted squared
    distance; points and weights are carried through unchanged.
    """
    return MonotoneGridFunction(f.points, isotonic(f.values, f.weights), f.weights)


def minmax_oracle(f: GridFunction) -> MonotoneGridFunction:
    """Brute-force projection from the min-max block-average formula.

    ``out[i] = min_{j >= i} max_{k <= i} avg(values[k..j])`` with weighted
    averages.  O(n^3); meant for checking :func:`pava_project` on small grids.
    """
    y, w = f.values, f.weights
    n = len(y)
    wy = np.concatenate([[0.0], np.cumsum(w * y)])
    ws = np.concatenate([[0.0], np.cumsum(w)])
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for j in range(i, n):
            inner = -np.inf
            for k in range(i + 1):
                avg = (wy[j + 1] - wy[k]) / (ws[j + 1] - ws[k])
                inner = max(inner, avg)
            best = min(best, inner)
        out[i] = best
    # block averages from prefix sums can break exact monotonicity by an ulp
    return MonotoneGridFunction(f.points, out, f.weights, tol_mono=1e-9 * (1 + np.abs(out).max()))


def _same_grid(f: GridFunction, g: GridFunction):
    if len(f) != len(g) or not np.array_equal(f.points, g.points):
        raise ValueError("grid functions are defined on different grids")


def sup_distance(f: GridFunction, g: GridFunction) -> float:
    """Largest absolute difference between ``f`` and ``g`` on their shared grid."""
    _same_grid(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def weighted_l2_distance(f: GridFunction, g: GridFunction) -> float:
    """L2 distance under the shared weights normalized to a probability mass."""
    _same_grid(f, g)
    if not np.array_equal(f.weights, g.weights):
        raise ValueError("grid functions carry different weights")
    p = f.weights / f.weights.sum()
    return float(np.sqrt(np.sum(p * (f.values - g.values) ** 2)))
