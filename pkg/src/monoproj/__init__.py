"""Monotone curve and surface estimation by projecting GP posterior draws.

Unconstrained Gaussian-process posterior draws are pushed onto the cone of
monotone functions (PAV for curves, alternating projections for surfaces)
and summarized pointwise.
"""

from .gp import DenseGP, FactorizationError, KernelParams, LatticeGP, latent_conditional, predict_grid
from .inference import (FitSummary, MonotoneFit, ProjectedDraws, fit_monotone, fit_report,
                        link_transform, project_draws, rmse, summarize)
from .mcmc import (McmcConfig, McmcError, PosteriorDraws, chain_diagnostics, fit_gaussian,
                   fit_probit)
from .pava import (GridFunction, MonotoneGridFunction, isotonic, isotonic_along, minmax_oracle,
                   pava_project, sup_distance, weighted_l2_distance)
from .proj2d import (Proj2dReport, SurfaceGrid, is_bimonotone, project_monotone, project_surface,
                     upper_set_oracle)
from .simgen import CURVE_TRUTHS, SURFACE_TRUTHS, SimDataset, simulate

__version__ = "0.1.0"
