"""Benchmark truths and simulated datasets.

Curve truths live on (0, 10].  Surface truths live on [0, 1]^2 and were
chosen for this package (smooth, bimonotone, values within a few units);
each is checked on a 64 x 64 grid when the module is imported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "CURVE_TRUTHS",
    "SURFACE_TRUTHS",
    "SimDataset",
    "curve_truth",
    "surface_truth",
    "equidistant_design",
    "lattice_design",
    "simulate",
]


def _flat(x):
    return np.full_like(x, 3.0)


def _sinusoidal(x):
    return 0.32 * (x + np.sin(x))


def _step(x):
    return np.where(x <= 8.0, 3.0, 6.0)


def _linear(x):
    return 0.3 * x


def _exponential(x):
    return 0.15 * np.exp(0.6 * x - 3.0)


def _logistic(x):
    return 3.0 / (1.0 + np.exp(-2.0 * x + 10.0))


CURVE_TRUTHS = {
    "flat": _flat,
    "sinusoidal": _sinusoidal,
    "step": _step,
    "linear": _linear,
    "exponential": _exponential,
    "logistic": _logistic,
}

SURFACE_TRUTHS = {
    "additive": lambda s, t: s + t,
    "product": lambda s, t: 2.0 * s * t,
    "smooth_step": lambda s, t: special.expit((s + t - 1.0) / 0.1),
    "logistic_ridge": lambda s, t: 2.0 * special.expit(8.0 * (0.7 * s + 0.3 * t - 0.5)),
    "flat": lambda s, t: np.ones(np.broadcast(s, t).shape),
    "exponential": lambda s, t: 0.5 * np.exp(1.2 * s + 0.8 * t) - 0.5,
    "mixture": lambda s, t: (special.ndtr((s - 0.3) / 0.2) * special.ndtr((t - 0.6) / 0.2)
                             + special.ndtr((s - 0.7) / 0.15) * special.ndtr((t - 0.3) / 0.25)),
}


def _verify_surfaces(m=64):
    g = np.linspace(0.0, 1.0, m)
    S, T = np.meshgrid(g, g, indexing="ij")
    for name, f in SURFACE_TRUTHS.items():
        v = f(S, T)
        if np.any(np.diff(v, axis=0) < 0) or np.any(np.diff(v, axis=1) < 0):
            raise AssertionError(f"surface truth {name!r} is not bimonotone")


_verify_surfaces()


def curve_truth(name: str, x):
    """Evaluate a curve truth on points in (0, 10]."""
    if name not in CURVE_TRUTHS:
        raise KeyError(f"unknown curve truth {name!r}; choose from {sorted(CURVE_TRUTHS)}")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x > 10):
        raise ValueError("curve truths are defined on (0, 10]")
    out = CURVE_TRUTHS[name](x)
    return float(out) if out.ndim == 0 else out


def surface_truth(name: str, s, t):
    """Evaluate a surface truth on points of [0, 1]^2."""
    if name not in SURFACE_TRUTHS:
        raise KeyError(f"unknown surface truth {name!r}; choose from {sorted(SURFACE_TRUTHS)}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any((s < 0) | (s > 1)) or np.any((t < 0) | (t > 1)):
        raise ValueError("surface truths are defined on [0, 1]^2")
    out = np.asarray(SURFACE_TRUTHS[name](s, t), dtype=float)
    return float(out) if out.ndim == 0 else out


def equidistant_design(n: int, upper: float = 10.0) -> np.ndarray:
    """``upper * i / n`` for i = 1..n: equally spaced, excludes 0, includes the end."""
    return upper * np.arange(1, n + 1) / n


def lattice_design(m1: int, m2: int) -> np.ndarray:
    """The m1 x m2 lattice of cell midpoints in [0, 1]^2, s varying slowest."""
    s = (np.arange(m1) + 0.5) / m1
    t = (np.arange(m2) + 0.5) / m2
    S, T = np.meshgrid(s, t, indexing="ij")
    return np.column_stack([S.ravel(), T.ravel()])


@dataclass
class SimDataset:
    """Simulated responses with their truth.

    ``trials`` is set for binary data (all ones).
    """

    X: np.ndarray
    y: np.ndarray
    truth: str
    sigma: float
    seed: int
    f0: np.ndarray
    trials: np.ndarray | None = None

    def __len__(self):
        return len(self.y)


def _resolve_truth(truth, dim):
    if callable(truth):
        return getattr(truth, "__name__", "custom"), truth
    table = CURVE_TRUTHS if dim == 1 else SURFACE_TRUTHS
    if truth not in table:
        kind = "curve" if dim == 1 else "surface"
        raise KeyError(f"unknown {kind} truth {truth!r}; choose from {sorted(table)}")
    return truth, table[truth]


def simulate(truth, n: int, sigma: float = 1.0, design: str = "equidistant",
             seed: int = 0, dim: int = 1, shape=None, binary: bool = False) -> SimDataset:
    """Draw a dataset ``y = F0(X) + N(0, sigma^2)``.

    Args:
      truth: a name from ``CURVE_TRUTHS`` (dim 1) or ``SURFACE_TRUTHS``
        (dim 2), or any vectorized callable taking one array per coordinate.
      n: sample size; for an equidistant surface design, ``n`` must equal
        ``m1 * m2`` (``shape`` defaults to the square root of ``n``).
      sigma: noise standard deviation; ignored when ``binary``.
      design: ``"equidistant"`` (curves: ``10 i / n``; surfaces: lattice of
        cell midpoints) or ``"uniform"`` (iid uniform on the domain).
      seed: seed for ``numpy.random.default_rng``.
      dim: 1 for curves, 2 for surfaces.
      shape: ``(m1, m2)`` for the surface lattice.
      binary: draw ``y ~ Bernoulli(Phi(F0(X)))`` instead of Gaussian noise.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    if design not in ("equidistant", "uniform"):
        raise ValueError(f"unknown design {design!r}; use 'equidistant' or 'uniform'")
    name, f = _resolve_truth(truth, dim)
    rng = np.random.default_rng(seed)
    if dim == 1:
        if design == "equidistant":
            X = equidistant_design(n)
        else:
            X = np.sort(10.0 * (1.0 - rng.random(n)))  # (0, 10]
        f0 = np.asarray(f(X), dtype=float)
    else:
        if design == "equidistant":
            if shape is None:
                m = int(round(np.sqrt(n)))
                shape = (m, m)
            if shape[0] * shape[1] != n:
                raise ValueError(f"lattice shape {shape} does not hold n={n} points")
            X = lattice_design(*shape)
        else:
            X = rng.random((n, 2))
        f0 = np.asarray(f(X[:, 0], X[:, 1]), dtype=float)
    if binary:
        y = (rng.random(n) < special.ndtr(f0)).astype(float)
        return SimDataset(X, y, name, 0.0, seed, f0, trials=np.ones(n, dtype=int))
    y = f0 + sigma * rng.standard_normal(n)
    return SimDataset(X, y, name, float(sigma), seed, f0)
