"""Squared-exponential Gaussian process utilities.

Covariance is ``beta**-1 * exp(-sum_k gamma_k (x_k - x'_k)**2)`` with zero
mean.  Inputs are expected on the unit cube; :class:`UnitScaler` maps raw
covariates there and back.

Two backends serve the samplers: :class:`DenseGP` factorizes the full Gram
matrix with a Cholesky decomposition, and :class:`LatticeGP` uses the
Kronecker structure of the Gram matrix on a full lattice, which keeps a
32 x 32 surface cheap.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "KernelParams",
    "GaussianState",
    "UnitScaler",
    "se_kernel",
    "gram_matrix",
    "cross_gram",
    "stable_cholesky",
    "latent_conditional",
    "predict_grid",
    "DenseGP",
    "LatticeGP",
    "lattice_axes",
    "FactorizationError",
]

NUGGET_START = 1e-8
NUGGET_MAX = 1e-4


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even after the largest allowed nugget."""


@dataclass(frozen=True)
class KernelParams:
    """Inverse amplitude ``beta`` and per-dimension rates ``gammas``."""

    beta: float
    gammas: tuple

    def __post_init__(self):
        gammas = tuple(float(g) for g in np.atleast_1d(self.gammas))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if len(gammas) == 0 or not all(g > 0 for g in gammas):
            raise ValueError("gammas must be a non-empty vector of positive rates")
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "gammas", gammas)

    @property
    def dim(self) -> int:
        return len(self.gammas)

    @property
    def amplitude(self) -> float:
        return 1.0 / self.beta


@dataclass
class GaussianState:
    """Mean and covariance of a Gaussian vector, with a Cholesky factor."""

    mean: np.ndarray
    covariance: np.ndarray
    chol: np.ndarray

    def sample(self, rng, size=None) -> np.ndarray:
        n = len(self.mean)
        z = rng.standard_normal((n,) if size is None else (size, n))
        return self.mean + z @ self.chol.T


class UnitScaler:
    """Affine map of each covariate column onto [0, 1]."""

    def __init__(self, X):
        X = _as_points(X)
        self.low = X.min(axis=0)
        span = X.max(axis=0) - self.low
        self.span = np.where(span > 0, span, 1.0)

    def transform(self, X):
        return (_as_points(X) - self.low) / self.span

    def inverse(self, U):
        return _as_points(U) * self.span + self.low


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    return X


def se_kernel(x1, x2, params: KernelParams) -> float:
    """Kernel value between two points."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != (params.dim,) or x2.shape != (params.dim,):
        raise ValueError(f"points must have dimension {params.dim}")
    d2 = np.dot(params.gammas, (x1 - x2) ** 2)
    return float(np.exp(-d2) / params.beta)


def _scaled_sqdist(A, B, gammas):
    g = np.sqrt(np.asarray(gammas))
    A = A * g
    B = B * g
    d2 = np.sum(A * A, 1)[:, None] + np.sum(B * B, 1)[None, :] - 2 * A @ B.T
    return np.maximum(d2, 0.0)


def cross_gram(A, B, params: KernelParams) -> np.ndarray:
    """Kernel matrix between point sets ``A`` (n x p) and ``B`` (m x p)."""
    A, B = _as_points(A), _as_points(B)
    if A.shape[1] != params.dim or B.shape[1] != params.dim:
        raise ValueError(f"points must have dimension {params.dim}")
    return np.exp(-_scaled_sqdist(A, B, params.gammas)) / params.beta


def gram_matrix(points, params: KernelParams, nugget: float = 0.0) -> np.ndarray:
    """Symmetric Gram matrix with ``nugget`` added to the diagonal."""
    if nugget < 0:
        raise ValueError("nugget must be non-negative")
    X = _as_points(points)
    K = cross_gram(X, X, params)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] = 1.0 / params.beta + nugget
    return K


def stable_cholesky(K, scale: float = 1.0):
    """Lower Cholesky factor of ``K``, adding jitter only if needed.

    Tries the matrix as is, then nuggets of ``1e-8 * scale`` growing tenfold
    up to ``1e-4 * scale``.  Returns ``(L, nugget)``.
    """
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    nugget = NUGGET_START * scale
    eye = np.eye(len(K))
    while nugget <= NUGGET_MAX * scale * (1 + 1e-12):
        try:
            return np.linalg.cholesky(K + nugget * eye), nugget
        except np.linalg.LinAlgError:
            nugget *= 10
    raise FactorizationError(f"matrix not positive definite with nugget up to {NUGGET_MAX * scale:g}")


def _noise_vector(sigma, n):
    sigma = np.asarray(sigma, dtype=float)
    var = np.broadcast_to(sigma ** 2, (n,)).copy()
    if np.any(~(var > 0)):
        raise ValueError("noise standard deviations must be positive")
    return var


def latent_conditional(y, X, params: KernelParams, sigma) -> GaussianState:
    """Posterior of ``w(X)`` given ``y = w(X) + noise`` under the zero-mean GP.

    ``sigma`` is the noise standard deviation, a scalar or one per point.
    """
    y = np.asarray(y, dtype=float)
    X = _as_points(X)
    if len(y) != len(X):
        raise ValueError("y and X must have the same length")
    var = _noise_vector(sigma, len(y))
    K = gram_matrix(X, params)
    L, _ = stable_cholesky(K + np.diag(var), params.amplitude)
    A = linalg.solve_triangular(L, K, lower=True)
    b = linalg.solve_triangular(L, y, lower=True)
    mean = A.T @ b
    cov = K - A.T @ A
    cov = 0.5 * (cov + cov.T)
    chol, _ = stable_cholesky(cov, params.amplitude)
    return GaussianState(mean, cov, chol)


def predict_grid(latent, X, grid, params, rng, sigma=None) -> np.ndarray:
    """Draw the latent path on ``grid`` given its values at ``X``.

    Args:
      latent: one draw (n,) or a stack of draws (k, n) of ``w(X)``.
      X: design points matching the draws.
      grid: points where the path is wanted.
      params: one KernelParams shared by all draws, or one per draw.
      rng: numpy Generator.
      sigma: if given, observation noise of this sd is added, giving
        predictive responses instead of latent values.

    Returns:
      Joint draws on the grid, shape (m,) or (k, m).
    """
    latent = np.asarray(latent, dtype=float)
    single = latent.ndim == 1
    latent = np.atleast_2d(latent)
    X, G = _as_points(X), _as_points(grid)
    if latent.shape[1] != len(X):
        raise ValueError("latent draws do not match the design")
    if isinstance(params, KernelParams):
        params = [params] * len(latent)
    if len(params) != len(latent):
        raise ValueError("need one KernelParams per draw")
    out = np.empty((len(latent), len(G)))
    cache = {}
    for k, (w, p) in enumerate(zip(latent, params)):
        if p not in cache:
            Lx, _ = stable_cholesky(gram_matrix(X, p), p.amplitude)
            Kgx = cross_gram(G, X, p)
            A = linalg.solve_triangular(Lx, Kgx.T, lower=True)
            proj = linalg.solve_triangular(Lx.T, A, lower=False).T
            cov = gram_matrix(G, p) - A.T @ A
            Lg, _ = stable_cholesky(0.5 * (cov + cov.T), p.amplitude)
            cache = {p: (proj, Lg)}
        proj, Lg = cache[p]
        out[k] = proj @ w + Lg @ rng.standard_normal(len(G))
        if sigma is not None:
            out[k] += sigma * rng.standard_normal(len(G))
    return out[0] if single else out


def lattice_axes(X, decimals: int = 12):
    """Detect a full lattice design.

    Returns ``(axes, order)`` where ``axes`` are the sorted unique
    coordinates per dimension and ``X[order]`` enumerates the lattice in
    C order, or ``None`` if ``X`` is not a full lattice without repeats.
    """
    X = _as_points(X)
    keys = np.round(X, decimals)
    axes = [np.unique(keys[:, k]) for k in range(X.shape[1])]
    if int(np.prod([len(a) for a in axes])) != len(X):
        return None
    idx = np.stack([np.searchsorted(a, keys[:, k]) for k, a in enumerate(axes)], 1)
    flat = np.ravel_multi_index(idx.T, [len(a) for a in axes])
    if len(np.unique(flat)) != len(X):
        return None
    order = np.argsort(flat)
    return axes, order


class DenseGP:
    """Marginal likelihood and latent draws via a dense Cholesky factor.

    Noise variances may differ by point.
    """

    def __init__(self, X):
        self.X = _as_points(X)
        self.n = len(self.X)
        self._sqdist = {}

    def _gram(self, gammas):
        # unit-amplitude kernel, cached per gamma vector (one entry)
        key = tuple(gammas)
        if key not in self._sqdist:
            self._sqdist = {key: np.exp(-_scaled_sqdist(self.X, self.X, gammas))}
        return self._sqdist[key]

    def _factor(self, beta, gammas, noise_var):
        C = self._gram(gammas) / beta
        M = C + np.diag(np.broadcast_to(noise_var, (self.n,)))
        L, _ = stable_cholesky(M, 1.0 / beta)
        return C, L

    def log_marginal(self, y, beta, gammas, noise_var) -> float:
        """log N(y; 0, K + diag(noise_var)) up to the 2*pi constant."""
        if self.n == 0:
            return 0.0
        _, L = self._factor(beta, gammas, noise_var)
        a = linalg.solve_triangular(L, y, lower=True, check_finite=False)
        return float(-0.5 * a @ a - np.sum(np.log(np.diag(L))))

    def moments(self, y, beta, gammas, noise_var):
        C, L = self._factor(beta, gammas, noise_var)
        A = linalg.solve_triangular(L, C, lower=True, check_finite=False)
        b = linalg.solve_triangular(L, y, lower=True, check_finite=False)
        cov = C - A.T @ A
        return A.T @ b, 0.5 * (cov + cov.T)

    def sample_latent(self, y, beta, gammas, noise_var, rng) -> np.ndarray:
        mean, cov = self.moments(y, beta, gammas, noise_var)
        chol, _ = stable_cholesky(cov, 1.0 / beta)
        return mean + chol @ rng.standard_normal(self.n)


class LatticeGP:
    """Exact GP computations on a full lattice with homoscedastic noise.

    The unit-amplitude Gram matrix is the Kronecker product of the per-axis
    Gram matrices, so one small eigendecomposition per axis diagonalizes
    ``K + s^2 I``.  Vectors are in the C order of the lattice.
    """

    def __init__(self, axes):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.shape = tuple(len(a) for a in self.axes)
        self.n = int(np.prod(self.shape))
        self._cache = {}

    def _eig_axis(self, k, gamma):
        key = (k, gamma)
        if key not in self._cache:
            if len(self._cache) >= 16:
                self._cache.clear()
            a = self.axes[k]
            lam, Q = np.linalg.eigh(np.exp(-gamma * (a[:, None] - a[None, :]) ** 2))
            self._cache[key] = (np.maximum(lam, 0.0), Q)
        return self._cache[key]

    def _eig(self, gammas):
        parts = [self._eig_axis(k, float(g)) for k, g in enumerate(gammas)]
        lam = functools.reduce(np.multiply.outer, [p[0] for p in parts])
        return lam, [p[1] for p in parts]

    def _rotate(self, v, Qs, transpose):
        t = v.reshape(self.shape)
        for k, Q in enumerate(Qs):
            M = Q.T if transpose else Q
            t = np.moveaxis(np.tensordot(M, t, axes=([1], [k])), 0, k)
        return t

    def log_marginal(self, y, beta, gammas, noise_var) -> float:
        lam, Qs = self._eig(gammas)
        yt = self._rotate(y, Qs, True)
        d = lam / beta + float(noise_var)
        return float(-0.5 * np.sum(yt * yt / d) - 0.5 * np.sum(np.log(d)))

    def moments(self, y, beta, gammas, noise_var):
        lam, Qs = self._eig(gammas)
        s = lam / beta
        d = s + float(noise_var)
        mean = self._rotate(self._rotate(y, Qs, True) * (s / d), Qs, False).ravel()
        Q = functools.reduce(np.kron, Qs)
        cov = (Q * (s * float(noise_var) / d).ravel()) @ Q.T
        return mean, cov

    def sample_latent(self, y, beta, gammas, noise_var, rng) -> np.ndarray:
        lam, Qs = self._eig(gammas)
        s = lam / beta
        d = s + float(noise_var)
        coef = self._rotate(y, Qs, True) * (s / d)
        coef = coef + np.sqrt(s * float(noise_var) / d) * rng.standard_normal(self.shape)
        return self._rotate(coef, Qs, False).ravel()
