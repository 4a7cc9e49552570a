"""MCMC for zero-mean squared-exponential GP regression.

Hyperparameters (beta, gamma_1..gamma_p and the noise precision) move by
random-walk Metropolis on the log scale, one scalar block at a time,
targeting the likelihood with the latent function integrated out.  After
every hyperparameter sweep the latent values at the design points are drawn
exactly from their Gaussian conditional.  All three hyperparameters get
Gamma(shape, rate) priors; the noise prior is on ``sigma**-2``.

The probit sampler augments every Bernoulli trial with a truncated normal
variable, which turns the latent update into the Gaussian one with unit
noise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .gp import DenseGP, LatticeGP, UnitScaler, lattice_axes

__all__ = [
    "McmcConfig",
    "PosteriorDraws",
    "fit_gaussian",
    "fit_probit",
    "chain_diagnostics",
    "effective_sample_size",
    "split_rhat",
    "spawn_seeds",
    "McmcError",
]

log = logging.getLogger(__name__)


class McmcError(RuntimeError):
    """The sampler hit a numerical failure."""


@dataclass
class McmcConfig:
    """Sampler settings.

    Priors are ``(shape, rate)`` pairs.  A step size of zero freezes that
    block at its initial value.  ``init_*`` left as None are set from the
    data (see :func:`fit_gaussian`).
    """

    n_iter: int = 5000
    burn_in: int = 1000
    seed: int = 0
    beta_prior: tuple = (4.0, 1.0)
    gamma_prior: tuple = (4.0, 1.0)
    precision_prior: tuple = (4.0, 1.0)
    step_beta: float = 0.5
    step_gamma: float = 0.5
    step_sigma: float = 0.3
    adapt: bool = True
    adapt_every: int = 50
    target_accept: float = 0.44
    init_beta: float | None = None
    init_gamma: float | tuple | None = None
    init_sigma: float | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need 0 <= burn_in < n_iter")
        for name in ("beta_prior", "gamma_prior", "precision_prior"):
            shape, rate = getattr(self, name)
            if not (shape > 0 and rate > 0):
                raise ValueError(f"{name} needs positive shape and rate")
        if min(self.step_beta, self.step_gamma, self.step_sigma) < 0:
            raise ValueError("step sizes must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def curves(cls, **overrides) -> "McmcConfig":
        """5,000 iterations with 1,000 burn-in."""
        return cls(**{"n_iter": 5000, "burn_in": 1000, **overrides})

    @classmethod
    def surfaces(cls, **overrides) -> "McmcConfig":
        """3,000 iterations with 500 burn-in."""
        return cls(**{"n_iter": 3000, "burn_in": 500, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PosteriorDraws:
    """Post-burn-in draws.

    ``latent`` has one row per draw with the latent function at the design
    points, in the order the design was given.  ``gamma_traces`` has one
    column per input dimension.
    """

    latent: np.ndarray
    beta_trace: np.ndarray
    gamma_traces: np.ndarray
    sigma_trace: np.ndarray
    acceptance_rates: dict
    seed: int
    X: np.ndarray = None
    scaler: UnitScaler = None
    step_sizes: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.beta_trace)

    def kernel_params(self, k: int):
        from .gp import KernelParams
        return KernelParams(self.beta_trace[k], tuple(self.gamma_traces[k]))


def spawn_seeds(root: int, count: int) -> list[int]:
    """Independent 64-bit seeds for ``count`` chains from one root seed.

    Uses ``numpy.random.SeedSequence(root).spawn(count)`` and takes the first
    64-bit word of each child's state, so seed ``k`` depends only on
    ``(root, k)``.
    """
    children = np.random.SeedSequence(root).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def _log_gamma_prior(logx, prior):
    # Gamma(shape, rate) density of x = exp(logx) times the Jacobian x
    shape, rate = prior
    return shape * logx - rate * math.exp(logx)


def _prepare_design(X, normalize):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size and not np.all(np.isfinite(X)):
        raise ValueError("design points must be finite")
    scaler = UnitScaler(X) if normalize and len(X) else None
    U = scaler.transform(X) if scaler is not None else X
    return X, U, scaler


def _backend(U, homoscedastic):
    """Kronecker backend for full lattices in 2+ dimensions, dense otherwise."""
    if homoscedastic and U.shape[1] >= 2 and len(U):
        found = lattice_axes(U)
        if found is not None:
            axes, order = found
            return LatticeGP(axes), order
    return DenseGP(U), None


class _Chain:
    """Shared Metropolis-within-Gibbs machinery for both likelihoods."""

    def __init__(self, config, dim, rng):
        self.cfg = config
        self.rng = rng
        self.dim = dim
        self.steps = {"beta": config.step_beta, "sigma": config.step_sigma}
        for k in range(dim):
            self.steps[f"gamma{k}"] = config.step_gamma
        self.accepted = {b: 0 for b in self.steps}
        self.tried = {b: 0 for b in self.steps}
        self.batch_acc = {b: 0 for b in self.steps}
        self.batch_n = 0
        self.adapt_round = 0

    def init_state(self, y, fixed_sigma):
        cfg = self.cfg
        ms = float(np.mean(y ** 2)) if len(y) else 1.0
        beta = cfg.init_beta if cfg.init_beta is not None else 1.0 / max(ms, 1e-2)
        g = cfg.init_gamma if cfg.init_gamma is not None else cfg.gamma_prior[0] / cfg.gamma_prior[1]
        gammas = np.broadcast_to(np.asarray(g, dtype=float), (self.dim,)).copy()
        if fixed_sigma:
            sigma = 1.0
        elif cfg.init_sigma is not None:
            sigma = cfg.init_sigma
        else:
            sigma = math.sqrt(0.5 * float(np.var(y))) if len(y) > 1 else 1.0
            sigma = max(sigma, 1e-3)
        if beta <= 0 or np.any(gammas <= 0) or sigma <= 0:
            raise ValueError("initial hyperparameters must be positive")
        return {"beta": math.log(beta), "sigma": -2.0 * math.log(sigma),
                **{f"gamma{k}": math.log(gammas[k]) for k in range(self.dim)}}

    @staticmethod
    def unpack(state, dim):
        beta = math.exp(state["beta"])
        gammas = tuple(math.exp(state[f"gamma{k}"]) for k in range(dim))
        noise_var = math.exp(-state["sigma"])
        return beta, gammas, noise_var

    def log_prior(self, state):
        cfg = self.cfg
        lp = _log_gamma_prior(state["beta"], cfg.beta_prior)
        lp += sum(_log_gamma_prior(state[f"gamma{k}"], cfg.gamma_prior) for k in range(self.dim))
        lp += _log_gamma_prior(state["sigma"], cfg.precision_prior)
        return lp

    def sweep(self, state, loglik, current, blocks):
        """One Metropolis update per block; returns the new state and target value."""
        for b in blocks:
            step = self.steps[b]
            if step == 0:
                continue
            prop = dict(state)
            prop[b] = state[b] + step * self.rng.standard_normal()
            try:
                cand = loglik(prop) + self.log_prior(prop)
            except np.linalg.LinAlgError:
                cand = -np.inf
            self.tried[b] += 1
            if math.log(self.rng.random()) < cand - current:
                state, current = prop, cand
                self.accepted[b] += 1
                self.batch_acc[b] += 1
        return state, current

    def adapt(self, blocks):
        """Batch adaptation of log step sizes toward the target acceptance."""
        self.batch_n += 1
        if self.batch_n < self.cfg.adapt_every:
            return
        self.adapt_round += 1
        delta = min(0.5, 1.0 / math.sqrt(self.adapt_round))
        for b in blocks:
            if self.steps[b] > 0:
                rate = self.batch_acc[b] / self.batch_n
                self.steps[b] *= math.exp(delta if rate > self.cfg.target_accept else -delta)
            self.batch_acc[b] = 0
        self.batch_n = 0

    def reset_counts(self):
        self.accepted = {b: 0 for b in self.steps}
        self.tried = {b: 0 for b in self.steps}

    def rates(self):
        return {b: (self.accepted[b] / self.tried[b] if self.tried[b] else float("nan"))
                for b in self.steps}


def _check_trace(state, it):
    if not all(math.isfinite(v) for v in state.values()):
        raise McmcError(f"non-finite hyperparameter state at iteration {it}: {state}")


def fit_gaussian(y, X, config: McmcConfig | None = None) -> PosteriorDraws:
    """Sample the GP posterior for ``y = w(X) + N(0, sigma^2)``.

    ``X`` is (n,) or (n, p); with ``config.normalize`` each column is mapped
    onto [0, 1] before the kernel sees it.  An empty ``y`` samples the
    hyperparameter priors.  Full lattice designs in two or more dimensions
    use the Kronecker backend.

    Defaults for unset initial values: ``beta = 1 / mean(y^2)``,
    ``gamma`` = prior mean, ``sigma = sqrt(var(y) / 2)``.
    """
    cfg = config or McmcConfig()
    y = np.asarray(y, dtype=float).ravel()
    X, U, scaler = _prepare_design(X, cfg.normalize)
    if len(y) != len(X):
        raise ValueError("y and X must have the same length")
    if len(y) == 1:
        raise ValueError("need at least two observations (or none, to sample the prior)")
    if not np.all(np.isfinite(y)):
        raise ValueError("responses must be finite")
    dim = U.shape[1] if U.ndim == 2 and U.shape[1] else 1
    rng = np.random.default_rng(cfg.seed)
    backend, order = _backend(U, True)
    yb = y if order is None else y[order]

    chain = _Chain(cfg, dim, rng)
    state = chain.init_state(y, fixed_sigma=False)
    blocks = ["beta"] + [f"gamma{k}" for k in range(dim)] + ["sigma"]

    def loglik(s):
        beta, gammas, nv = chain.unpack(s, dim)
        return backend.log_marginal(yb, beta, gammas, nv)

    current = loglik(state) + chain.log_prior(state)
    keep = cfg.n_iter - cfg.burn_in
    latent = np.empty((keep, len(y)))
    betas, sigmas = np.empty(keep), np.empty(keep)
    gammas_tr = np.empty((keep, dim))
    for it in range(cfg.n_iter):
        state, current = chain.sweep(state, loglik, current, blocks)
        _check_trace(state, it)
        if it < cfg.burn_in:
            if cfg.adapt:
                chain.adapt(blocks)
            if it == cfg.burn_in - 1:
                chain.reset_counts()
            continue
        k = it - cfg.burn_in
        beta, gammas, nv = chain.unpack(state, dim)
        if len(y):
            try:
                w = backend.sample_latent(yb, beta, gammas, nv, rng)
            except np.linalg.LinAlgError as exc:
                raise McmcError(f"latent draw failed at iteration {it}: {exc}") from exc
            if order is not None:
                w = _unpermute(w, order)
            latent[k] = w
        betas[k], gammas_tr[k], sigmas[k] = beta, gammas, math.sqrt(nv)
    rates = chain.rates()
    log.info("gaussian fit done: acceptance %s", {b: round(r, 3) for b, r in rates.items()})
    return PosteriorDraws(latent, betas, gammas_tr, sigmas, rates, cfg.seed,
                          X=U, scaler=scaler, step_sizes=dict(chain.steps))


def _unpermute(v, order):
    out = np.empty_like(v)
    out[order] = v
    return out


def _truncated_normal(mean, positive, rng):
    """Unit-variance normal draws truncated to (0, inf) or (-inf, 0).

    Inverse-CDF sampling in log space so that means far on the wrong side
    of zero stay finite.
    """
    sgn = np.where(positive, 1.0, -1.0)
    m = sgn * mean
    # X = m - Phi^-1(U * Phi(m)) is N(m, 1) restricted to X > 0
    u = rng.random(len(mean))
    x = m - special.ndtri_exp(np.log(u) + special.log_ndtr(m))
    return sgn * np.maximum(x, 0.0)


def fit_probit(y, X, config: McmcConfig | None = None, trials=None) -> PosteriorDraws:
    """Sample the GP posterior for ``pr(y=1 | x) = Phi(w(x))``.

    ``y`` holds successes out of ``trials`` (1 per row by default).  Every
    trial gets a latent ``z ~ N(w(x), 1)`` constrained by its outcome; the
    latent function then sees the per-row means of ``z`` with noise variance
    ``1 / trials``.  The noise scale is fixed at 1.
    """
    cfg = config or McmcConfig()
    y = np.asarray(y, dtype=float).ravel()
    X, U, scaler = _prepare_design(X, cfg.normalize)
    n = len(y)
    if n != len(X) or n == 0:
        raise ValueError("y and X must have the same non-zero length")
    m = np.ones(n, dtype=int) if trials is None else np.asarray(trials)
    if m.shape != (n,) or np.any(m < 1) or np.any(m != np.round(m)):
        raise ValueError("trials must be positive integers, one per observation")
    m = m.astype(int)
    if np.any(y < 0) or np.any(y > m) or np.any(y != np.round(y)):
        raise ValueError("y must be integer counts between 0 and trials")
    y = y.astype(int)
    dim = U.shape[1]
    rng = np.random.default_rng(cfg.seed)
    backend, order = _backend(U, homoscedastic=bool(np.all(m == m[0])))
    noise_var = 1.0 / m if order is None else float(1.0 / m[0])

    # one row per Bernoulli trial: successes first within each observation
    idx = np.repeat(np.arange(n), m)
    within = np.arange(len(idx)) - np.repeat(np.cumsum(m) - m, m)
    positive = within < np.repeat(y, m)

    chain = _Chain(cfg, dim, rng)
    chain.steps["sigma"] = 0.0
    state = chain.init_state(y, fixed_sigma=True)
    state["sigma"] = 0.0
    blocks = ["beta"] + [f"gamma{k}" for k in range(dim)]
    w = np.zeros(n)

    def zbar_for(w):
        z = _truncated_normal(w[idx], positive, rng)
        zb = np.bincount(idx, weights=z, minlength=n) / m
        return zb if order is None else zb[order]

    def make_loglik(zb):
        def loglik(s):
            beta, gammas, _ = chain.unpack(s, dim)
            return backend.log_marginal(zb, beta, gammas, noise_var)
        return loglik

    keep = cfg.n_iter - cfg.burn_in
    latent = np.empty((keep, n))
    betas = np.empty(keep)
    gammas_tr = np.empty((keep, dim))
    for it in range(cfg.n_iter):
        zb = zbar_for(w)
        loglik = make_loglik(zb)
        current = loglik(state) + chain.log_prior(state)
        state, current = chain.sweep(state, loglik, current, blocks)
        _check_trace(state, it)
        beta, gammas, _ = chain.unpack(state, dim)
        try:
            wb = backend.sample_latent(zb, beta, gammas, noise_var, rng)
        except np.linalg.LinAlgError as exc:
            raise McmcError(f"latent draw failed at iteration {it}: {exc}") from exc
        w = wb if order is None else _unpermute(wb, order)
        if not np.all(np.isfinite(w)):
            raise McmcError(f"non-finite latent draw at iteration {it}")
        if it < cfg.burn_in:
            if cfg.adapt:
                chain.adapt(blocks)
            if it == cfg.burn_in - 1:
                chain.reset_counts()
            continue
        k = it - cfg.burn_in
        latent[k], betas[k], gammas_tr[k] = w, beta, gammas
    rates = chain.rates()
    rates.pop("sigma", None)
    return PosteriorDraws(latent, betas, gammas_tr, np.ones(keep), rates, cfg.seed,
                          X=U, scaler=scaler, step_sizes=dict(chain.steps))


def _autocov(x):
    n = len(x)
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    return acov


def effective_sample_size(trace) -> float:
    """ESS from the autocorrelations summed over Geyer's initial monotone sequence.

    Returns ``nan`` for a constant trace.
    """
    x = np.asarray(trace, dtype=float)
    n = len(x)
    acov = _autocov(x)
    if not acov[0] > 0:
        return float("nan")
    rho = acov / acov[0]
    # pair sums Gamma_k = rho_2k + rho_2k+1, truncated at first non-positive, made monotone
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    cut = np.argmax(pairs <= 0) if np.any(pairs <= 0) else len(pairs)
    pairs = np.minimum.accumulate(pairs[:cut])
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1.0 / np.log10(max(n, 10))))


def split_rhat(trace) -> float:
    """Potential scale reduction from the two halves of one chain."""
    x = np.asarray(trace, dtype=float)
    half = len(x) // 2
    chains = np.stack([x[:half], x[len(x) - half:]])
    n = half
    within = chains.var(axis=1, ddof=1).mean()
    between = n * chains.mean(axis=1).var(ddof=1)
    if not within > 0:
        return float("nan")
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def chain_diagnostics(draws: PosteriorDraws, min_draws: int = 100) -> dict:
    """ESS, split-R-hat and degeneracy flags for every hyperparameter trace.

    Frozen (constant) traces are flagged ``degenerate`` with ``nan`` ESS
    and R-hat.
    """
    if len(draws) < min_draws:
        raise ValueError(f"need at least {min_draws} retained draws, got {len(draws)}")
    traces = {"beta": draws.beta_trace, "sigma": draws.sigma_trace}
    for k in range(draws.gamma_traces.shape[1]):
        traces[f"gamma{k}"] = draws.gamma_traces[:, k]
    out = {}
    for name, tr in traces.items():
        degenerate = bool(np.ptp(tr) == 0)
        out[name] = {
            "ess": float("nan") if degenerate else effective_sample_size(tr),
            "rhat": float("nan") if degenerate else split_rhat(tr),
            "degenerate": degenerate,
        }
    return {"traces": out, "acceptance_rates": dict(draws.acceptance_rates),
            "n_draws": len(draws)}
