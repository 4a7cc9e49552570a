"""Posterior projection: monotone estimates from unconstrained GP draws.

Each posterior draw of the latent function is projected onto the monotone
cone on its own (PAV for curves, alternating projections for lattices) and
the projected draws are summarized pointwise.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import mcmc
from .gp import lattice_axes
from .pava import isotonic_along
from .proj2d import DEFAULT_MAX_ITER, DEFAULT_TOL, project_monotone

__all__ = [
    "ProjectedDraws",
    "FitSummary",
    "MonotoneFit",
    "project_draws",
    "link_transform",
    "summarize",
    "fit_report",
    "rmse",
    "fit_monotone",
]

log = logging.getLogger(__name__)


@dataclass
class ProjectedDraws:
    """Projected draws plus per-draw convergence of the lattice projection.

    For curves every draw converges in one pass.
    """

    values: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray
    max_violation: np.ndarray

    def __len__(self):
        return len(self.values)

    def stats(self) -> dict:
        return {
            "n_draws": len(self),
            "n_not_converged": int(np.sum(~self.converged)),
            "max_iterations": int(self.iterations.max(initial=0)),
            "mean_iterations": float(self.iterations.mean()) if len(self) else 0.0,
            "max_violation": float(self.max_violation.max(initial=0.0)),
        }


@dataclass
class FitSummary:
    """Pointwise posterior summary of (projected) draws."""

    points: np.ndarray
    posterior_mean: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray
    level: float
    sigma_bar: float = float("nan")
    diagnostics: dict = field(default_factory=dict)


def _project_1d(draws, points, weights):
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    n = draws.shape[1]
    points = np.arange(n, dtype=float) if points is None else np.asarray(points, dtype=float).ravel()
    if len(points) != n:
        raise ValueError("points do not match the draws")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per point")
    # pool tied abscissae into one point carrying their total weight
    uniq, inv = np.unique(points, return_inverse=True)
    if len(uniq) < n:
        mass = np.bincount(inv, weights=w)
        agg = np.stack([np.bincount(inv, weights=w * d) for d in draws]) / mass
        out = isotonic_along(agg, axis=1, weights=mass)[:, inv]
    else:
        order = np.argsort(points, kind="stable")
        proj = isotonic_along(draws[:, order], axis=1, weights=w[order])
        out = np.empty_like(proj)
        out[:, order] = proj
    k = len(draws)
    return ProjectedDraws(out, np.ones(k, bool), np.ones(k, int), np.zeros(k))


def _project_chunk(args):
    chunk, weights, tol_mono, max_iter, tol_step = args
    res = [project_monotone(v, tol_mono=tol_mono, max_iter=max_iter, weights=weights,
                            tol_step=tol_step) for v in chunk]
    return (np.stack([r[0] for r in res]), np.array([r[3] for r in res]),
            np.array([r[1] for r in res]), np.array([r[2] for r in res]))


def project_draws(draws, points=None, weights=None, shape=None, tol_mono: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, tol_step=None, jobs: int = 1) -> ProjectedDraws:
    """Project every draw onto the monotone cone.

    Args:
      draws: (k, n) curve draws, or (k, m1, m2[, m3]) lattice draws.  With
        ``shape`` given, (k, n) rows are reshaped to the lattice.
      points: curve abscissae, any order, ties allowed (tied points are
        projected as one point with their summed weight).
      weights: per-point masses; defaults to uniform (empirical design
        measure).
      shape: lattice shape for flat lattice draws.
      tol_mono, max_iter, tol_step: lattice projection controls.
      jobs: worker processes for lattice draws; results do not depend on it.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0 or len(draws) == 0:
        raise ValueError("no draws to project")
    if not np.all(np.isfinite(draws)):
        raise ValueError("draws must be finite")
    if shape is None and draws.ndim == 2:
        return _project_1d(draws, points, weights)
    flat_input = shape is not None
    if flat_input:
        draws = draws.reshape((len(draws),) + tuple(shape))
    if weights is not None:
        weights = np.asarray(weights, dtype=float).reshape(draws.shape[1:])
    jobs = max(1, int(jobs))
    if jobs == 1 or len(draws) < 2 * jobs:
        vals, ok, its, viol = _project_chunk((draws, weights, tol_mono, max_iter, tol_step))
    else:
        chunks = np.array_split(draws, jobs)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_project_chunk,
                                  [(c, weights, tol_mono, max_iter, tol_step) for c in chunks]))
        vals, ok, its, viol = (np.concatenate([p[i] for p in parts]) for i in range(4))
    if not ok.all():
        log.warning("%d of %d lattice projections hit max_iter=%d", int((~ok).sum()), len(ok), max_iter)
    if flat_input:
        vals = vals.reshape(len(vals), -1)
    return ProjectedDraws(vals, ok, its, viol)


def link_transform(draws, link: str = "identity"):
    """Map latent draws to the response scale (``"identity"`` or ``"probit"``)."""
    if link == "identity":
        return np.asarray(draws, dtype=float)
    if link == "probit":
        return special.ndtr(np.asarray(draws, dtype=float))
    raise ValueError(f"unknown link {link!r}")


def summarize(projected, level: float = 0.99, sigma_trace=None, points=None,
              min_draws: int = 50) -> FitSummary:
    """Pointwise mean and equal-tailed ``level`` band of the draws."""
    values = projected.values if isinstance(projected, ProjectedDraws) else np.asarray(projected, float)
    if not 0 < level < 1:
        raise ValueError("level must lie strictly between 0 and 1")
    if len(values) < min_draws:
        raise ValueError(f"need at least {min_draws} draws, got {len(values)}")
    mean = values.mean(axis=0)
    lo, hi = np.quantile(values, [(1 - level) / 2, (1 + level) / 2], axis=0)
    # identical draws can leave the mean an ulp outside the band
    lo, hi = np.minimum(lo, mean), np.maximum(hi, mean)
    sigma_bar = float(np.mean(sigma_trace)) if sigma_trace is not None else float("nan")
    pts = None if points is None else np.asarray(points)
    return FitSummary(pts, mean, lo, hi, float(level), sigma_bar)


def rmse(estimate, truth, points=None) -> float:
    """Root mean squared difference over shared evaluation points."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"estimate {estimate.shape} and truth {truth.shape} differ in shape")
    if points is not None and len(np.asarray(points)) != estimate.shape[0]:
        raise ValueError("points do not match the estimate")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def fit_report(summary: FitSummary, y, truth=None) -> dict:
    """Fit statistics of a summary computed at the design points.

    Always: posterior mean sigma, SD of the posterior-mean residuals
    ``y - Fhat`` and ``cor(y, Fhat)``.  With the true function values at the
    design: ``cor(y - F0, y - Fhat)`` and the mean squared error of ``Fhat``.
    """
    y = np.asarray(y, dtype=float).ravel()
    fhat = np.asarray(summary.posterior_mean, dtype=float).ravel()
    if len(fhat) != len(y):
        raise ValueError("summary is not on the design points")
    resid = y - fhat
    out = {
        "sigma_bar": summary.sigma_bar,
        "sd_resid": float(np.std(resid, ddof=1)),
        "cor_pred": _cor(y, fhat),
    }
    if truth is not None:
        f0 = np.asarray(truth, dtype=float).ravel()
        out["cor_resid"] = _cor(y - f0, resid)
        out["mse"] = float(np.mean((fhat - f0) ** 2))
    return out


def _cor(a, b):
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class MonotoneFit:
    """Everything a fit produces: draws, projections and both summaries."""

    draws: mcmc.PosteriorDraws
    projected: ProjectedDraws
    summary: FitSummary
    unprojected: FitSummary
    lattice_shape: tuple | None = None


def fit_monotone(y, X, model: str = "gaussian", config: mcmc.McmcConfig | None = None,
                 level: float = 0.99, weights=None, trials=None, tol_mono: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, tol_step=None, jobs: int = 1) -> MonotoneFit:
    """Run the sampler, project every draw and summarize at the design points.

    Curves (1D ``X``) are projected with PAV using ``weights`` (uniform
    by default).  Designs in two or more dimensions must form a full
    lattice.  ``model="probit"`` samples the binary model and projects
    ``Phi(w)``.
    """
    X = np.asarray(X, dtype=float)
    Xp = X[:, None] if X.ndim == 1 else X
    lattice = None
    if Xp.shape[1] >= 2:
        lattice = lattice_axes(Xp)
        if lattice is None:
            raise ValueError("multivariate designs must form a full lattice")
    if model == "gaussian":
        draws = mcmc.fit_gaussian(y, X, config)
        link = "identity"
    elif model == "probit":
        draws = mcmc.fit_probit(y, X, config, trials=trials)
        link = "probit"
    else:
        raise ValueError(f"unknown model {model!r}")
    resp = link_transform(draws.latent, link)
    if lattice is None:
        proj = project_draws(resp, points=Xp[:, 0], weights=weights)
        shape = None
    else:
        axes, order = lattice
        shape = tuple(len(a) for a in axes)
        wl = None if weights is None else np.asarray(weights, float)[order]
        lat = project_draws(resp[:, order], shape=shape, weights=wl, tol_mono=tol_mono,
                            max_iter=max_iter, tol_step=tol_step, jobs=jobs)
        vals = np.empty_like(lat.values)
        vals[:, order] = lat.values
        proj = ProjectedDraws(vals, lat.converged, lat.iterations, lat.max_violation)
    summary = summarize(proj, level, draws.sigma_trace, points=X)
    raw = summarize(resp, level, draws.sigma_trace, points=X)
    summary.diagnostics = {"projection": proj.stats()}
    return MonotoneFit(draws, proj, summary, raw, shape)
