"""Estimators of a population mean from data with missing outcomes.

Every regression-based estimator fits its outcome model on respondents only
and requires an intercept column in the design, since the zero-mean
respondent residual identity depends on it.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, MissingIntercept, NoRespondents, RankDeficient
from .numeric import has_intercept, solve_least_squares
from .propensity import (
    QUINTILE_INDICATORS,
    SPLINE_LOGIT,
    SQUARED_LP,
    BasisSpec,
    PropensityScores,
    make_quintile_indicator_basis,
    make_spline_basis,
    make_squared_lp_basis,
    quintile_knots,
)

HORVITZ_THOMPSON = "horvitz_thompson"
HAJEK = "hajek"
HARD = "hard"
SMOOTH = "smooth"

DEFAULT_DELTA = 0.05
DEFAULT_RAMP_WIDTH = 0.01

# relative residual norm below which an added basis column counts as redundant
AUGMENT_RTOL = 1e-7


@dataclass
class Dataset:
    """Covariates ``X`` (intercept first), response indicators ``t`` and outcomes ``y``.

    Outcomes of nonrespondents are replaced by NaN on construction.
    """

    X: np.ndarray
    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        y = np.array(self.y, dtype=float, copy=True)
        if self.X.ndim != 2:
            raise DimensionMismatch("X must be 2-D")
        n = self.X.shape[0]
        if self.t.shape != (n,) or y.shape != (n,):
            raise DimensionMismatch(f"t and y must have length {n}")
        if not np.all((self.t == 0) | (self.t == 1)):
            raise ValueError("t must be binary 0/1")
        y[self.t == 0] = np.nan
        if not np.all(np.isfinite(y[self.t == 1])):
            raise ValueError("every respondent needs a finite outcome")
        self.y = y

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def respondents(self):
        return self.t == 1

    @property
    def n_respondents(self):
        return int(self.t.sum())

    def with_design(self, X):
        return Dataset(X, self.t, self.y)


@dataclass
class EstimatorResult:
    mu_hat: float
    se: float = None
    n_respondents: int = 0
    max_weight: float = None
    notes: list = field(default_factory=list)
    estimator: str = ""


def sandwich_se(phi):
    """sqrt(sum(phi**2)) / n for centred influence contributions ``phi``."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("influence contributions must be finite")
    return float(np.sqrt(np.sum(phi**2)) / phi.size)


def _require_respondents(d):
    if d.n_respondents == 0:
        raise NoRespondents("no unit has an observed outcome")


def _check_ps(d, ps):
    if ps.pi_hat.shape != (d.n,):
        raise DimensionMismatch(f"propensities have shape {ps.pi_hat.shape}, expected ({d.n},)")


def _outcome_fit(d, X=None, weights=None):
    """Respondent-only regression; returns (predictions for all units, residuals)."""
    X = d.X if X is None else X
    _require_respondents(d)
    if not has_intercept(X):
        raise MissingIntercept("outcome design needs a leading column of ones")
    r = d.respondents
    if r.sum() < X.shape[1]:
        raise RankDeficient(int(r.sum()), X.shape[1], f"{int(r.sum())} respondents for {X.shape[1]} columns")
    w = np.ones(int(r.sum())) if weights is None else weights[r]
    fit = solve_least_squares(X[r], d.y[r], w)
    m_hat = X @ fit.coefficients
    resid = np.where(r, np.nan_to_num(d.y) - m_hat, 0.0)
    return m_hat, resid


def _notes(ps=None):
    notes = ["plug-in sandwich"]
    if ps is not None and ps.n_clipped:
        notes.append(f"clipped {ps.n_clipped} propensities to [{ps.clip_epsilon:g}, {1 - ps.clip_epsilon:g}]")
    return notes


def _max_weight(d, ps):
    return float(np.max(1.0 / ps.pi_hat[d.respondents]))


def naive_mean(d):
    _require_respondents(d)
    r = d.respondents
    nr = d.n_respondents
    mu = float(np.mean(d.y[r]))
    phi = np.where(r, np.nan_to_num(d.y) - mu, 0.0) * d.n / nr
    return EstimatorResult(mu, sandwich_se(phi), nr, None, _notes(), "naive_mean")


def _regression_result(d, m_hat, resid, name, notes):
    mu = float(np.mean(m_hat))
    phi = m_hat + resid - mu
    return EstimatorResult(mu, sandwich_se(phi), d.n_respondents, None, notes, name)


def mu_ols(d):
    m_hat, resid = _outcome_fit(d)
    return _regression_result(d, m_hat, resid, "mu_ols", _notes())


def mu_ipw(d, ps, form=HORVITZ_THOMPSON):
    _require_respondents(d)
    _check_ps(d, ps)
    r = d.respondents
    wy = np.where(r, np.nan_to_num(d.y) / ps.pi_hat, 0.0)
    if form == HORVITZ_THOMPSON:
        mu = float(np.sum(wy) / d.n)
        phi = wy - mu
    elif form == HAJEK:
        w = np.where(r, 1.0 / ps.pi_hat, 0.0)
        mu = float(np.sum(wy) / np.sum(w))
        phi = w * (np.nan_to_num(d.y) - mu) * d.n / np.sum(w)
    else:
        raise ValueError(f"unknown IPW form {form!r}")
    return EstimatorResult(mu, sandwich_se(phi), d.n_respondents, _max_weight(d, ps), _notes(ps), f"mu_ipw_{form}")


def _augmented(d, m_hat, resid, ps, weight, name):
    aug = weight * resid / ps.pi_hat
    mu = float(np.mean(m_hat + aug))
    phi = m_hat + aug - mu
    return EstimatorResult(mu, sandwich_se(phi), d.n_respondents, _max_weight(d, ps), _notes(ps), name)


def mu_bc_ols(d, ps):
    _check_ps(d, ps)
    m_hat, resid = _outcome_fit(d)
    return _augmented(d, m_hat, resid, ps, 1.0, "mu_bc_ols")


def mu_wls(d, ps):
    _check_ps(d, ps)
    m_hat, resid = _outcome_fit(d, weights=1.0 / ps.pi_hat)
    res = _regression_result(d, m_hat, resid, "mu_wls", _notes(ps))
    res.max_weight = _max_weight(d, ps)
    return res


def _append_independent(X, extra, rows, rtol=AUGMENT_RTOL):
    """Append the columns of ``extra`` that add rank to ``X[rows]``.

    Returns (design, number of dropped columns). A non-finite column is
    dropped when constant and rejected otherwise.
    """
    kept = []
    dropped = 0
    base = X[rows]
    for col in np.asarray(extra, dtype=float).T:
        if not np.all(np.isfinite(col)):
            if np.all(col == col[0]):
                dropped += 1
                continue
            raise ValueError("propensity basis column has non-finite entries")
        c = col[rows]
        cn = np.linalg.norm(c)
        if cn == 0.0:
            dropped += 1
            continue
        q, _ = np.linalg.qr(base)
        res = c - q @ (q.T @ c)
        if np.linalg.norm(res) <= rtol * cn:
            dropped += 1
            continue
        base = np.column_stack([base, c])
        kept.append(col)
    if kept:
        X = np.column_stack([X] + kept)
    return X, dropped


def propensity_basis_columns(ps, basis):
    """Basis columns for ``basis`` plus notes on any merged knots/strata."""
    notes = []
    if basis.kind == SPLINE_LOGIT:
        knots = basis.knots if basis.knots is not None else quintile_knots(ps.eta_hat)
        uniq = np.unique(knots)
        if uniq.size < knots.size:
            notes.append(f"merged {knots.size - uniq.size} coincident knots")
        cols = np.column_stack([ps.eta_hat, make_spline_basis(ps.eta_hat, uniq)])
    elif basis.kind == QUINTILE_INDICATORS:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cols = make_quintile_indicator_basis(ps.pi_hat, basis.strata)
        for w in caught:
            notes.append(str(w.message))
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    elif basis.kind == SQUARED_LP:
        cols = make_squared_lp_basis(ps.eta_hat)
    else:  # pragma: no cover - BasisSpec validates kind
        raise ValueError(basis.kind)
    return cols, notes


def pi_cov_design(d, ps, basis=None):
    """Outcome design augmented with propensity basis columns.

    Columns that are redundant on the respondent rows (for instance the
    linear eta term when eta is already a combination of X) are dropped.
    """
    basis = basis or BasisSpec()
    _check_ps(d, ps)
    cols, notes = propensity_basis_columns(ps, basis)
    X, dropped = _append_independent(d.X, cols, d.respondents)
    if dropped:
        notes.append(f"dropped {dropped} redundant basis columns")
    return X, notes


def mu_pi_cov(d, ps, basis=None):
    basis = basis or BasisSpec()
    _require_respondents(d)
    X, extra_notes = pi_cov_design(d, ps, basis)
    m_hat, resid = _outcome_fit(d, X)
    return _regression_result(d, m_hat, resid, f"mu_pi_cov[{basis.kind}]", _notes(ps) + extra_notes)


def hybrid_weights(pi, mode=HARD, delta=DEFAULT_DELTA, ramp_width=DEFAULT_RAMP_WIDTH):
    if not 0 < delta < 0.5:
        raise ValueError(f"delta must lie in (0, 0.5), got {delta}")
    if mode == HARD:
        return (pi >= delta).astype(float)
    if mode == SMOOTH:
        if ramp_width <= 0:
            raise ValueError("ramp_width must be positive")
        return expit((pi - delta) / ramp_width)
    raise ValueError(f"unknown hybrid mode {mode!r}")


def mu_hybrid(d, ps, mode=HARD, delta=DEFAULT_DELTA, ramp_width=DEFAULT_RAMP_WIDTH):
    """Residual correction applied only where the propensity is not small."""
    _check_ps(d, ps)
    w = hybrid_weights(ps.pi_hat, mode, delta, ramp_width)
    m_hat, resid = _outcome_fit(d)
    return _augmented(d, m_hat, resid, ps, w, "mu_hybrid" if mode == HARD else "mu_hybrid_smooth")


# --- configuration and dispatch -------------------------------------------

ESTIMATOR_NAMES = (
    "naive_mean",
    "mu_ols",
    "mu_ipw_ht",
    "mu_ipw_hajek",
    "mu_bc_ols",
    "mu_wls",
    "mu_pi_cov",
    "mu_hybrid",
    "mu_hybrid_smooth",
)


@dataclass
class EstimatorConfig:
    kind: str
    basis: BasisSpec = field(default_factory=BasisSpec)
    epsilon: float = 1e-6
    delta: float = DEFAULT_DELTA
    ramp_width: float = DEFAULT_RAMP_WIDTH
    ipw_form: str = HORVITZ_THOMPSON
    hybrid_mode: str = HARD

    def __post_init__(self):
        if self.kind not in ("naive_mean", "mu_ols", "mu_ipw", "mu_bc_ols", "mu_wls", "mu_pi_cov", "mu_hybrid"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 0.5)")
        if self.ramp_width <= 0:
            raise ValueError("ramp_width must be positive")

    @classmethod
    def from_name(cls, name, **kw):
        if name not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {name!r}")
        if name == "mu_ipw_ht":
            return cls("mu_ipw", ipw_form=HORVITZ_THOMPSON, **kw)
        if name == "mu_ipw_hajek":
            return cls("mu_ipw", ipw_form=HAJEK, **kw)
        if name == "mu_hybrid_smooth":
            return cls("mu_hybrid", hybrid_mode=SMOOTH, **kw)
        return cls(name, **kw)

    @property
    def label(self):
        if self.kind == "mu_ipw":
            return "mu_ipw_ht" if self.ipw_form == HORVITZ_THOMPSON else "mu_ipw_hajek"
        if self.kind == "mu_hybrid":
            return "mu_hybrid" if self.hybrid_mode == HARD else "mu_hybrid_smooth"
        if self.kind == "mu_pi_cov":
            return f"mu_pi_cov[{self.basis.kind}]"
        return self.kind

    @property
    def needs_propensity(self):
        return self.kind not in ("naive_mean", "mu_ols")


def run_estimator(config, d, ps=None):
    """Dispatch ``config`` on dataset ``d`` with propensity scores ``ps``."""
    k = config.kind
    if config.needs_propensity and ps is None:
        raise ValueError(f"{config.label} needs propensity scores")
    if k == "naive_mean":
        res = naive_mean(d)
    elif k == "mu_ols":
        res = mu_ols(d)
    elif k == "mu_ipw":
        res = mu_ipw(d, ps, config.ipw_form)
    elif k == "mu_bc_ols":
        res = mu_bc_ols(d, ps)
    elif k == "mu_wls":
        res = mu_wls(d, ps)
    elif k == "mu_pi_cov":
        res = mu_pi_cov(d, ps, config.basis)
    else:
        res = mu_hybrid(d, ps, config.hybrid_mode, config.delta, config.ramp_width)
    res.estimator = config.label
    return res
