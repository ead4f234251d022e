"""Estimators of a population mean from incomplete data, with propensity
diagnostics and a Monte Carlo harness for misspecified-model scenarios."""

__version__ = "0.1.0"

from .diagnostics import group_residual_summary, residual_diagnostic
from .estimators import (
    Dataset,
    EstimatorConfig,
    EstimatorResult,
    mu_bc_ols,
    mu_hybrid,
    mu_ipw,
    mu_ols,
    mu_pi_cov,
    mu_wls,
    naive_mean,
    run_estimator,
    sandwich_se,
)
from .montecarlo import RunConfig, compute_metrics, metrics_table, run_simulation
from .numeric import add_intercept, fit_logistic, loess_fit, quantiles, solve_least_squares
from .propensity import BasisSpec, PropensityScores, make_propensity_scores
from .scenarios import ScenarioSpec, generate_sample, load_scenario, validate_scenario
