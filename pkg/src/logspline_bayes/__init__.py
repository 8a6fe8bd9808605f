"""Adaptive Bayesian density estimation with hierarchical log-spline priors."""

from .density import (AnalyticDensity, Density, LogSplineDensity, MixtureDensity,
                      PiecewiseConstantDensity, Theta, grad_log_norm,
                      log_norm_const, log_pdf, project_sum_zero, sample_iid)
from .entropy import (DiscreteFamily, TailBoundReport, covering_number,
                      hausdorff_alpha_entropy, tail_bound_check,
                      renyi_integral, walker_predictive)
from .estimator import AdaptiveLogSplineDensity, check_unit_interval
from .harness import (BFResult, CellResult, IndexPartition, RateBoundConstants,
                      RateResult, SelectionResult, SlopeFit, TruthSpec,
                      bf_experiment, classify_indices, fit_log_slope, make_truth,
                      r_min_constant, rate_experiment, run_adaptive_grid,
                      selection_experiment)
from .inference import (ConvergenceError, IndexPosterior, InferenceError,
                        PosteriorRun, aggregate_index_posterior, bayes_factor,
                        index_posterior, log_marginal, map_estimate,
                        posterior_ball_mass, posterior_sample, run_posterior)
from .metrics import batch_distances, hellinger, hellinger_star, l2_distance
from .priors import (IndexPrior, MassEstimate, ModelSpec, make_fixed_spec,
                     make_model_spec, prior_ball_mass, prior_log_density,
                     sample_prior_theta, sample_prior_thetas, uniform_index_prior)
from .splines import SplineBasis, build_basis, eval_basis

__version__ = "0.1.0"

__all__ = [
    "AdaptiveLogSplineDensity",
    "AnalyticDensity",
    "BFResult",
    "CellResult",
    "ConvergenceError",
    "Density",
    "DiscreteFamily",
    "IndexPartition",
    "IndexPosterior",
    "IndexPrior",
    "InferenceError",
    "TailBoundReport",
    "LogSplineDensity",
    "MassEstimate",
    "MixtureDensity",
    "ModelSpec",
    "PiecewiseConstantDensity",
    "PosteriorRun",
    "RateBoundConstants",
    "RateResult",
    "SelectionResult",
    "SlopeFit",
    "SplineBasis",
    "Theta",
    "TruthSpec",
    "aggregate_index_posterior",
    "batch_distances",
    "bayes_factor",
    "bf_experiment",
    "build_basis",
    "check_unit_interval",
    "classify_indices",
    "covering_number",
    "eval_basis",
    "fit_log_slope",
    "grad_log_norm",
    "hausdorff_alpha_entropy",
    "hellinger",
    "hellinger_star",
    "index_posterior",
    "l2_distance",
    "tail_bound_check",
    "log_marginal",
    "log_norm_const",
    "log_pdf",
    "make_fixed_spec",
    "make_model_spec",
    "make_truth",
    "map_estimate",
    "posterior_ball_mass",
    "posterior_sample",
    "prior_ball_mass",
    "prior_log_density",
    "project_sum_zero",
    "r_min_constant",
    "rate_experiment",
    "renyi_integral",
    "run_adaptive_grid",
    "run_posterior",
    "sample_iid",
    "sample_prior_theta",
    "sample_prior_thetas",
    "selection_experiment",
    "uniform_index_prior",
    "walker_predictive",
]
