"""Least squares, logistic IRLS, sample quantiles and loess."""
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import expit

from . import _kernels
from .errors import (
    DegenerateResponse,
    DimensionMismatch,
    EmptyInput,
    ProbOutOfRange,
    RankDeficient,
    SeparationSuspected,
    SpanTooSmall,
)

RANK_RTOL = 1e-10

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 50
IRLS_MAX_HALVINGS = 10
SEPARATION_BOUND = 30.0
SEPARATION_PROB = 1e-10

LOESS_SPAN = 2.0 / 3.0
LOESS_DEGREE = 1
LOESS_GRID_POINTS = 100

_P_LO = np.finfo(float).tiny
_P_HI = np.nextafter(1.0, 0.0)


def add_intercept(x):
    """Prepend a column of ones to a 1-D or 2-D covariate array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def has_intercept(X):
    X = np.asarray(X)
    return X.ndim == 2 and X.shape[1] > 0 and bool(np.all(X[:, 0] == 1.0))


@dataclass
class LinearFit:
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    weights: np.ndarray
    rank: int


@dataclass
class LogisticFit:
    coefficients: np.ndarray
    linear_predictors: np.ndarray
    probabilities: np.ndarray
    converged: bool
    iterations: int
    deviance: float


@dataclass
class LoessCurve:
    grid: np.ndarray
    values: np.ndarray
    # per-point fallback flags, see drmean._kernels.LOESS_*
    flags: np.ndarray

    @property
    def degenerate(self):
        return bool(np.any(self.flags != _kernels.LOESS_OK))


def _check_design(X, n=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"design must be 2-D, got shape {X.shape}")
    if n is not None and X.shape[0] != n:
        raise DimensionMismatch(f"design has {X.shape[0]} rows, expected {n}")
    return X


def solve_least_squares(X, y, w=None):
    """Weighted least squares via column-pivoted QR.

    Rows with zero weight do not influence the coefficients but still get
    fitted values and residuals. Raises RankDeficient when a pivot of R falls
    below ``RANK_RTOL`` times the largest one.
    """
    y = np.asarray(y, dtype=float)
    X = _check_design(X, y.shape[0])
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatch(f"weights have shape {w.shape}, expected ({n},)")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    if not np.all(np.isfinite(X)):
        raise ValueError("design contains non-finite entries")
    use = w > 0
    if use.sum() < p:
        raise RankDeficient(int(use.sum()), p, f"only {int(use.sum())} positively weighted rows for {p} columns")
    sw = np.sqrt(w[use])
    A = X[use] * sw[:, None]
    b = y[use] * sw
    if not np.all(np.isfinite(b)):
        raise ValueError("response contains non-finite entries on weighted rows")
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_RTOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < p:
        raise RankDeficient(rank, p)
    beta = np.empty(p)
    beta[piv] = scipy.linalg.solve_triangular(R, Q.T @ b)
    fitted = X @ beta
    return LinearFit(beta, fitted, y - fitted, w, rank)


def _deviance(t, eta):
    # -2 * sum(t*eta - log(1 + exp(eta)))
    return 2.0 * float(np.sum(np.logaddexp(0.0, eta) - t * eta))


def fit_logistic(X, t, tol=IRLS_TOL, max_iter=IRLS_MAX_ITER):
    """Bernoulli maximum likelihood by iteratively reweighted least squares."""
    t = np.asarray(t, dtype=float)
    X = _check_design(X, t.shape[0])
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("response must be binary 0/1")
    tbar = t.mean()
    if tbar == 0.0 or tbar == 1.0:
        raise DegenerateResponse(f"all responses equal {int(tbar)}")

    alpha = np.zeros(X.shape[1])
    if has_intercept(X):
        alpha[0] = math.log(tbar / (1.0 - tbar))
    eta = X @ alpha
    dev = _deviance(t, eta)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        p = expit(eta)
        wt = np.maximum(p * (1.0 - p), 1e-300)
        z = eta + (t - p) / wt
        try:
            new = solve_least_squares(X, z, wt).coefficients
        except RankDeficient:
            if it == 1:
                raise
            raise SeparationSuspected(
                f"IRLS weights collapsed at iteration {it}; max|alpha| = {np.abs(alpha).max():.3g}"
            ) from None
        new_eta = X @ new
        new_dev = _deviance(t, new_eta)
        halvings = 0
        while new_dev > dev and halvings < IRLS_MAX_HALVINGS:
            new = 0.5 * (alpha + new)
            new_eta = X @ new
            new_dev = _deviance(t, new_eta)
            halvings += 1
        change = abs(dev - new_dev) / (abs(new_dev) + 0.1)
        alpha, eta, dev = new, new_eta, new_dev
        if change < tol:
            converged = True
            break
    big = np.abs(alpha).max() > SEPARATION_BOUND
    if not converged and big:
        raise SeparationSuspected(
            f"no convergence in {max_iter} iterations with max|alpha| = {np.abs(alpha).max():.3g}"
        )
    probs = np.clip(expit(eta), _P_LO, _P_HI)
    # the deviance criterion also "converges" on separated data as deviance -> 0
    if big and np.any((probs < SEPARATION_PROB) | (probs > 1.0 - SEPARATION_PROB)):
        raise SeparationSuspected(
            f"fitted probabilities numerically 0/1 with max|alpha| = {np.abs(alpha).max():.3g}"
        )
    return LogisticFit(alpha, eta, probs, converged, it, dev)


def quantiles(values, probs):
    """Order-statistic interpolation at h = (n - 1) * p."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise EmptyInput("quantiles of an empty vector")
    p = np.asarray(probs, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise ProbOutOfRange(f"probabilities must lie in [0, 1], got {p}")
    h = (v.size - 1) * p
    lo = np.floor(h).astype(int)
    hi = np.minimum(lo + 1, v.size - 1)
    frac = h - lo
    a, b = v[lo], v[hi]
    with np.errstate(invalid="ignore"):
        out = np.where((frac == 0) | (a == b), a, a + frac * (b - a))
    return out


def loess_fit(x, y, span=LOESS_SPAN, degree=LOESS_DEGREE, grid=None, n_grid=LOESS_GRID_POINTS):
    """Tricube-weighted local polynomial fit evaluated on ``grid``.

    The neighbourhood of a grid point is its ceil(span * n) nearest x values
    plus every point tied at the boundary distance. Points where all
    neighbours share one x, or the local design is singular, fall back to a
    local mean and are flagged in ``LoessCurve.flags``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch("x and y lengths differ")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if not 0 < span <= 1:
        raise ValueError("span must lie in (0, 1]")
    n = x.size
    if n == 0:
        raise EmptyInput("loess on empty data")
    q = max(1, math.ceil(span * n - 1e-9))
    if q < degree + 1:
        raise SpanTooSmall(f"neighbourhood of {q} points cannot fit degree {degree}")
    if grid is None:
        grid = np.linspace(x.min(), x.max(), n_grid)
    grid = np.asarray(grid, dtype=float).ravel()
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid values must be finite")
    values, flags = _kernels.loess_kernel(x, y, grid, q, degree)
    return LoessCurve(grid, values, flags)
