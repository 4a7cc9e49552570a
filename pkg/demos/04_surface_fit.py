"""Monotone surface estimation on a 32 x 32 lattice.

Lattice designs use an exact Kronecker eigendecomposition of the kernel, so
1,024 points cost little per iteration.

Run: python demos/04_surface_fit.py   (about 10 seconds)
"""
from monoproj.inference import fit_monotone, fit_report
from monoproj.mcmc import McmcConfig
from monoproj.simgen import simulate

for name in ("product", "smooth_step"):
    ds = simulate(name, 1024, sigma=0.1, dim=2, seed=5)
    fit = fit_monotone(ds.y, ds.X, config=McmcConfig.surfaces(seed=6))
    rep = fit_report(fit.summary, ds.y, ds.f0)
    proj = fit.projected.stats()
    print(f"{name:12s} " + "  ".join(f"{k} {v:.4f}" for k, v in rep.items())
          + f"  sweeps mean {proj['mean_iterations']:.0f}, capped {proj['n_not_converged']}")
