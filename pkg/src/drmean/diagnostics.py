"""Residual-versus-propensity diagnostics for the outcome model."""
from dataclasses import dataclass

import numpy as np

from .errors import DrMeanError
from .numeric import LOESS_DEGREE, LOESS_GRID_POINTS, LOESS_SPAN, loess_fit, solve_least_squares
from .scenarios import rng_stream

LOGIT_PROPENSITY = "logit_propensity"
FITTED_VALUE = "fitted_value"
DISPLAY_FRACTION = 0.2


class EmptyFitGroup(DrMeanError):
    pass


@dataclass
class DiagnosticPlotData:
    x: np.ndarray
    residual: np.ndarray
    group: np.ndarray
    display: np.ndarray
    curves: dict  # group value -> LoessCurve
    x_axis: str
    subsample_fraction: float
    coefficients: np.ndarray


def _display_flags(m, fraction, seed):
    flags = np.zeros(m, dtype=bool)
    k = int(round(fraction * m))
    if k:
        flags[rng_stream(seed, 0, 0).choice(m, size=k, replace=False)] = True
    return flags


def residual_diagnostic(
    d,
    ps=None,
    fit_group=1,
    x_axis=LOGIT_PROPENSITY,
    y_full=None,
    span=LOESS_SPAN,
    degree=LOESS_DEGREE,
    n_grid=LOESS_GRID_POINTS,
    subsample_fraction=DISPLAY_FRACTION,
    seed=0,
):
    """Residuals of an OLS fit on units with ``t == fit_group``, with per-group loess trends.

    Without ``y_full`` only respondents have outcomes, so only they get
    points and the fit group must be 1. With ``y_full`` (simulation) every
    unit gets a point and both groups get a curve. Curves always use every
    point of the group; ``display`` only marks a seeded subsample.
    """
    if x_axis not in (LOGIT_PROPENSITY, FITTED_VALUE):
        raise ValueError(f"unknown x_axis {x_axis!r}")
    if x_axis == LOGIT_PROPENSITY and ps is None:
        raise ValueError("logit_propensity axis needs propensity scores")
    t = d.t
    if y_full is None:
        y = d.y
        avail = t == 1
    else:
        y = np.asarray(y_full, dtype=float)
        avail = np.isfinite(y)
    in_fit = (t == fit_group) & avail
    if not in_fit.any():
        raise EmptyFitGroup(f"no units with t = {fit_group} and an observed outcome")
    fit = solve_least_squares(d.X[in_fit], y[in_fit])
    fitted = d.X @ fit.coefficients
    xs = ps.eta_hat if x_axis == LOGIT_PROPENSITY else fitted
    idx = np.flatnonzero(avail)
    resid = y[idx] - fitted[idx]
    group = t[idx].astype(int)
    curves = {}
    for g in (1, 0):
        sel = group == g
        if sel.any():
            curves[g] = loess_fit(xs[idx][sel], resid[sel], span, degree, n_grid=n_grid)
    return DiagnosticPlotData(
        xs[idx], resid, group, _display_flags(idx.size, subsample_fraction, seed), curves,
        x_axis, subsample_fraction, fit.coefficients,
    )


@dataclass
class ResidualSummary:
    respondent_mean: float
    nonrespondent_mean: float
    nonresponse_rate: float
    implied_mu_ols_bias: float


def group_residual_summary(residuals, t):
    """Mean residual per group and the bias it implies for the OLS mean.

    Nonrespondent residuals given as NaN (outcome unobserved) leave the
    nonrespondent fields as None.
    """
    r = np.asarray(residuals, dtype=float)
    t = np.asarray(t, dtype=float)
    if r.shape != t.shape:
        raise ValueError("residuals and t must have the same length")
    rate = float(np.mean(t == 0))
    resp = r[t == 1]
    non = r[t == 0]
    resp_mean = float(resp.mean()) if resp.size else None
    if non.size and np.all(np.isfinite(non)):
        non_mean = float(non.mean())
        implied = -rate * non_mean
    else:
        non_mean = implied = None
    return ResidualSummary(resp_mean, non_mean, rate, implied)
