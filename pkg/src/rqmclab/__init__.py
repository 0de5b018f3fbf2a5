"""Randomized quasi-Monte Carlo pricing laboratory: scrambled Sobol points,
closed-form preintegration of discontinuous payoffs, and optimal-drift
importance sampling, with an RMSE convergence harness."""

from .analysis import GrowthFit, growth_check, mixed_partial, smooth_clip, smooth_clip_vec
from .estimators import (McSource, Method, Problem, RmseRow, RunRecord,
                         StudyResult, estimate, fanout_seed, fit_slope,
                         reference_value, rmse_study, run_method)
from .lds import (DirectionNumbers, PointGenerator, default_direction_numbers,
                  load_direction_numbers, new_generator)
from .mathfn import (shifted_normal_logdensity, std_normal_cdf,
                     std_normal_inv_cdf, std_normal_pdf)
from .models import (BasketSpec, BsAsianSpec, HestonSpec, basket_payoff,
                     bs_asian_payoff, bs_asset_path, heston_payoff)
from .odis import ISProposal, find_drift, is_transform, tail_moment_estimate
from .pathgen import (ConditionalFactor, PathFactor, bm_covariance,
                      brownian_bridge_factor, cholesky_factor,
                      conditional_factor, path_factor, pca_factor,
                      positive_first_column)
from .preint import (PreintegratedIntegrand, PsiSolveResult, basket_preint,
                     bs_asian_preint, bs_conditional_payoff, heston_preint,
                     preintegrated_integrand, quadrature_preint,
                     solve_psi_basket)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
