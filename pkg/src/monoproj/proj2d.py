"""Projection of gridded surfaces onto the coordinate-wise monotone cone.

Lines along each axis are projected with PAV in turn, and a residual is
kept per axis.  Each axis projection sees the original surface plus the
residuals of the *other* axes, so the iterates converge to the projection
onto the intersection of the per-axis cones rather than to some point in
it.  For two axes the residuals are the ``S`` (along s) and ``T`` (along t)
corrections.

An iterate can be monotone in every direction long before it is the
projection (after one sweep it always is, since PAV preserves order
between lines), so termination also requires the residuals to settle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numba
import numpy as np

from .pava import _pav_kernel, isotonic_along

__all__ = [
    "SurfaceGrid",
    "Proj2dReport",
    "project_surface",
    "project_monotone",
    "upper_set_oracle",
    "is_bimonotone",
    "max_violation",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class SurfaceGrid:
    """Values on the lattice ``s_points x t_points``; rows index s."""

    s_points: np.ndarray
    t_points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s_points, dtype=float)
        t = np.asarray(self.t_points, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or t.ndim != 1 or len(s) == 0 or len(t) == 0:
            raise ValueError("axes must be non-empty 1D arrays")
        if np.any(np.diff(s) <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError("axes must be strictly increasing")
        if v.shape != (len(s), len(t)):
            raise ValueError(f"values shape {v.shape} does not match axes ({len(s)}, {len(t)})")
        if not np.all(np.isfinite(v)):
            raise ValueError("surface values must be finite")
        object.__setattr__(self, "s_points", s)
        object.__setattr__(self, "t_points", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values) -> "SurfaceGrid":
        """Wrap a matrix using unit-spaced axes on [0, 1]."""
        v = np.asarray(values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a matrix")
        m1, m2 = v.shape
        return cls(np.linspace(0, 1, m1) if m1 > 1 else np.zeros(1),
                   np.linspace(0, 1, m2) if m2 > 1 else np.zeros(1), v)

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values) -> "SurfaceGrid":
        return SurfaceGrid(self.s_points, self.t_points, values)


@dataclass
class Proj2dReport:
    """Outcome of :func:`project_surface`.

    ``iterations`` counts sweeps until the iterate was monotone within
    ``tol_mono`` and no residual moved by more than ``tol_step`` over a
    sweep.  ``first_monotone`` is the earliest sweep whose iterate was
    already monotone within ``tol_mono``; that iterate is generally not yet
    the projection.  ``norms`` holds the grid L2 norm of every half-step
    iterate in order when tracking was requested.
    """

    result: SurfaceGrid
    iterations: int
    max_violation: float
    converged: bool
    first_monotone: int = 0
    norms: list = field(default_factory=list)


def max_violation(values, axes=None) -> float:
    """Largest decrease between neighbours along any of ``axes``."""
    v = np.asarray(values, dtype=float)
    axes = range(v.ndim) if axes is None else axes
    worst = 0.0
    for a in axes:
        if v.shape[a] > 1:
            worst = max(worst, float(np.max(-np.diff(v, axis=a), initial=0.0)))
    return worst


def is_bimonotone(w: SurfaceGrid | np.ndarray, tol: float = 0.0) -> tuple[bool, float]:
    """Check coordinate-wise monotonicity; returns ``(flag, max_violation)``."""
    values = w.values if isinstance(w, SurfaceGrid) else np.asarray(w, dtype=float)
    worst = max_violation(values)
    return worst <= tol, worst


@numba.njit(cache=True)
def _violation2d(x):
    m1, m2 = x.shape
    worst = 0.0
    for i in range(m1):
        for j in range(m2):
            if i + 1 < m1 and x[i, j] - x[i + 1, j] > worst:
                worst = x[i, j] - x[i + 1, j]
            if j + 1 < m2 and x[i, j] - x[i, j + 1] > worst:
                worst = x[i, j] - x[i, j + 1]
    return worst


@numba.njit(cache=True)
def _alternate2d(w, wt, tol_mono, tol_step, max_iter, track):
    m1, m2 = w.shape
    S = np.zeros((m1, m2))
    T = np.zeros((m1, m2))
    x = w.copy()
    col_in = np.empty(m1)
    col_w = np.empty(m1)
    col_out = np.empty(m1)
    row_in = np.empty(m2)
    row_out = np.empty(m2)
    norms = np.empty(2 * max_iter if track else 0)
    first = 0
    viol = np.inf
    for it in range(1, max_iter + 1):
        change = 0.0
        # along s (down each column) on w + T
        for j in range(m2):
            for i in range(m1):
                col_in[i] = w[i, j] + T[i, j]
                col_w[i] = wt[i, j]
            _pav_kernel(col_in, col_w, col_out)
            for i in range(m1):
                r = col_out[i] - col_in[i]
                d = abs(r - S[i, j])
                if d > change:
                    change = d
                S[i, j] = r
                x[i, j] = col_out[i]
        if track:
            norms[2 * it - 2] = np.sqrt(np.sum(wt * x * x))
        if first == 0 and _violation2d(x) <= tol_mono:
            first = it
        # along t (across each row) on w + S
        for i in range(m1):
            for j in range(m2):
                row_in[j] = w[i, j] + S[i, j]
            _pav_kernel(row_in, wt[i], row_out)
            for j in range(m2):
                r = row_out[j] - row_in[j]
                d = abs(r - T[i, j])
                if d > change:
                    change = d
                T[i, j] = r
                x[i, j] = row_out[j]
        if track:
            norms[2 * it - 1] = np.sqrt(np.sum(wt * x * x))
        viol = _violation2d(x)
        if first == 0 and viol <= tol_mono:
            first = it
        if not np.isfinite(change):
            return x, it, viol, False, first, norms[: 2 * it], False
        if viol <= tol_mono and change <= tol_step:
            return x, it, viol, True, first, norms[: 2 * it], True
    return x, max_iter, viol, False, first, norms, True


def _alternate_nd(w, wt, axes, tol_mono, tol_step, max_iter, track):
    residuals = {a: np.zeros_like(w) for a in axes}
    total = np.zeros_like(w)
    x = w.copy()
    norms = []
    first = 0
    viol = np.inf
    for it in range(1, max_iter + 1):
        change = 0.0
        for a in axes:
            base = w + (total - residuals[a])
            x = isotonic_along(base, axis=a, weights=wt)
            new_res = x - base
            change = max(change, float(np.max(np.abs(new_res - residuals[a]))))
            total = total - residuals[a] + new_res
            residuals[a] = new_res
            if track:
                norms.append(float(np.sqrt(np.sum(wt * x * x))))
            if first == 0 and max_violation(x, axes) <= tol_mono:
                first = it
        if not np.isfinite(change):
            raise FloatingPointError("non-finite values during monotone projection")
        viol = max_violation(x, axes)
        if viol <= tol_mono and change <= tol_step:
            return x, it, viol, True, first, norms
    return x, max_iter, viol, False, first, norms


def project_monotone(values, tol_mono: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     weights=None, axes=None, tol_step: float | None = None,
                     track_norms: bool = False):
    """Project an array onto the cone of arrays non-decreasing along ``axes``.

    Any number of dimensions (all axes by default).  Each sweep projects
    along every axis once, feeding each axis the original values plus the
    current residuals of the other axes.

    Returns ``(projected, iterations, max_violation, converged,
    first_monotone, norms)``.  Convergence means violation at most
    ``tol_mono`` and no residual change above ``tol_step`` (defaults to
    ``tol_mono``) across a full sweep.
    """
    w = np.ascontiguousarray(values, dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError("values must be finite")
    if tol_mono <= 0:
        raise ValueError("tol_mono must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    tol_step = tol_mono if tol_step is None else tol_step
    if weights is None:
        wt = np.ones_like(w)
    else:
        wt = np.ascontiguousarray(np.broadcast_to(np.asarray(weights, dtype=float), w.shape))
        if np.any(wt <= 0) or not np.all(np.isfinite(wt)):
            raise ValueError("weights must be finite and strictly positive")
    axes = list(range(w.ndim)) if axes is None else sorted({a % w.ndim for a in axes})
    axes = [a for a in axes if w.shape[a] > 1]
    if not axes:
        return w.copy(), 1, 0.0, True, 1, []
    if len(axes) == 1:
        x = isotonic_along(w, axis=axes[0], weights=wt)
        return x, 1, max_violation(x, axes), True, 1, [float(np.sqrt(np.sum(wt * x * x)))] if track_norms else []
    if w.ndim == 2:
        x, it, viol, ok, first, norms, finite = _alternate2d(
            w, wt, float(tol_mono), float(tol_step), int(max_iter), bool(track_norms))
        if not finite:
            raise FloatingPointError("non-finite values during surface projection")
        return x, int(it), float(viol), bool(ok), int(first), list(norms)
    return _alternate_nd(w, wt, axes, tol_mono, tol_step, max_iter, track_norms)


def project_surface(w: SurfaceGrid, tol_mono: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, weights=None,
                    tol_step: float | None = None, track_norms: bool = False) -> Proj2dReport:
    """Least-squares projection of ``w`` onto bimonotone surfaces.

    Alternates PAV along s (down the columns of ``w.values``) and along t
    (across the rows), carrying the residual of each direction into the
    other.  ``converged=False`` means ``max_iter`` sweeps ran out first;
    the last iterate is still returned.

    Args:
      w: the surface.
      tol_mono: largest tolerated neighbour decrease at termination.
      max_iter: cap on the number of sweeps.
      weights: optional per-point masses (same shape as the values).
      tol_step: largest tolerated residual change over the final sweep.
      track_norms: record the norm of every half-step iterate.
    """
    out, it, viol, ok, first, norms = project_monotone(
        w.values, tol_mono=tol_mono, max_iter=max_iter, weights=weights,
        tol_step=tol_step, track_norms=track_norms)
    return Proj2dReport(w.with_values(out), it, viol, ok, first, norms)


def _lower_sets(m1, m2):
    """All down-closed subsets of the m1 x m2 lattice as boolean masks.

    A lower set is a staircase: row i keeps its first ``c[i]`` cells with
    ``c`` non-increasing.
    """
    masks = []
    cols = np.arange(m2)
    for c in itertools.product(range(m2 + 1), repeat=m1):
        if all(c[i] >= c[i + 1] for i in range(m1 - 1)):
            masks.append(cols[None, :] < np.array(c)[:, None])
    return masks


def upper_set_oracle(w: SurfaceGrid | np.ndarray, weights=None, max_points: int = 12):
    """Brute-force bimonotone projection by enumerating lower and upper sets.

    ``out[x] = min_{L lower, x in L} max_{U upper, x in U} avg(w on L & U)``.
    Exponential in the grid size; refuses grids with more than
    ``max_points`` cells.
    """
    as_grid = isinstance(w, SurfaceGrid)
    v = w.values if as_grid else np.asarray(w, dtype=float)
    if v.ndim != 2:
        raise ValueError("oracle needs a 2D grid")
    m1, m2 = v.shape
    if m1 * m2 > max_points:
        raise ValueError(f"grid of {m1 * m2} points exceeds the oracle limit of {max_points}")
    wt = np.ones_like(v) if weights is None else np.broadcast_to(np.asarray(weights, float), v.shape)
    lowers = [m for m in _lower_sets(m1, m2) if m.any()]
    uppers = [~m for m in _lower_sets(m1, m2) if (~m).any()]
    # avg[i, j] is the weighted mean of v over lowers[i] & uppers[j]; nan if empty
    lo = np.array([m.ravel() for m in lowers], dtype=float)
    up = np.array([m.ravel() for m in uppers], dtype=float)
    num = (lo * (wt * v).ravel()) @ up.T
    den = (lo * wt.ravel()) @ up.T
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(den > 0, num / den, np.nan)
    out = np.empty_like(v)
    for i in range(m1):
        for j in range(m2):
            li = [k for k, m in enumerate(lowers) if m[i, j]]
            ui = [k for k, m in enumerate(uppers) if m[i, j]]
            out[i, j] = np.min(np.max(avg[np.ix_(li, ui)], axis=1))
    return w.with_values(out) if as_grid else out
