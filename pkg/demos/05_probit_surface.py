"""Monotone probability surface from binary responses.

Each Bernoulli outcome gets a truncated-normal latent variable; the GP
draws are mapped through the normal CDF and then projected.

Run: python demos/05_probit_surface.py   (about 15 seconds)
"""
import numpy as np
from scipy import special

from monoproj.inference import fit_monotone
from monoproj.mcmc import McmcConfig
from monoproj.simgen import simulate

ds = simulate(lambda s, t: 2 * (s + t) - 2, 400, dim=2, binary=True, seed=7)
fit = fit_monotone(ds.y, ds.X, model="probit", config=McmcConfig.surfaces(seed=8))
p = fit.summary.posterior_mean
p0 = special.ndtr(ds.f0)
print("range of estimated probabilities: [%.3f, %.3f]" % (p.min(), p.max()))
print("mse against the true probabilities: %.4f" % np.mean((p - p0) ** 2))
print("band width at the lattice corners:",
      np.round((fit.summary.band_upper - fit.summary.band_lower).reshape(20, 20)[[0, -1], [0, -1]], 3))
