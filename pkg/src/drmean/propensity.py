"""Propensity scores and the propensity-derived covariate bases."""
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCutsWarning, EpsilonOutOfRange, KnotsNotIncreasing, TooFewUnits
from .numeric import LogisticFit, quantiles

DEFAULT_EPSILON = 1e-6

SPLINE_LOGIT = "spline_logit"
QUINTILE_INDICATORS = "quintile_indicators"
SQUARED_LP = "squared_lp"
BASIS_KINDS = (SPLINE_LOGIT, QUINTILE_INDICATORS, SQUARED_LP)


def logit(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


@dataclass
class PropensityScores:
    """Fitted response propensities and their logits.

    Direct construction performs no clipping; use ``make_propensity_scores``.
    """

    pi_hat: np.ndarray
    eta_hat: np.ndarray
    clip_epsilon: float = DEFAULT_EPSILON
    n_clipped: int = 0

    @classmethod
    def from_probabilities(cls, pi, epsilon=None):
        pi = np.asarray(pi, dtype=float)
        if epsilon is None:
            return cls(pi, logit(pi), 0.0, 0)
        return make_propensity_scores(pi, epsilon)


def make_propensity_scores(fit, epsilon=DEFAULT_EPSILON):
    """Clip fitted propensities to [epsilon, 1 - epsilon] and take logits.

    ``fit`` is a LogisticFit or an array of probabilities.
    """
    if not 0 < epsilon < 0.5:
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 0.5), got {epsilon}")
    probs = fit.probabilities if isinstance(fit, LogisticFit) else np.asarray(fit, dtype=float)
    clipped = np.clip(probs, epsilon, 1.0 - epsilon)
    n_clipped = int(np.sum(clipped != probs))
    return PropensityScores(clipped, logit(clipped), float(epsilon), n_clipped)


@dataclass
class BasisSpec:
    kind: str = SPLINE_LOGIT
    # None means 4 knots at the quintiles of eta over all units
    knots: np.ndarray = None
    strata: int = 5

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; expected one of {BASIS_KINDS}")
        if self.strata < 2:
            raise ValueError("strata must be at least 2")
        if self.knots is not None:
            self.knots = np.asarray(self.knots, dtype=float)
            if np.any(np.diff(self.knots) <= 0):
                raise KnotsNotIncreasing(f"knots must be strictly increasing: {self.knots}")


def quintile_knots(eta, count=4):
    """Knots at the interior quantiles j/(count+1) of ``eta``."""
    return quantiles(eta, np.arange(1, count + 1) / (count + 1))


def make_spline_basis(eta, knots):
    """Hinge columns max(0, eta - k) for each knot (no linear term)."""
    eta = np.asarray(eta, dtype=float)
    knots = np.asarray(knots, dtype=float)
    if np.any(np.diff(knots) <= 0):
        raise KnotsNotIncreasing(f"knots must be strictly increasing: {knots}")
    diff = eta[:, None] - knots[None, :]
    with np.errstate(invalid="ignore"):
        return np.where(eta[:, None] > knots[None, :], diff, 0.0)


def make_quintile_indicator_basis(pi, strata=5):
    """Indicators for strata 2..strata of ``pi`` cut at its j/strata quantiles.

    Bin 1 is [min, cut_1] and bin j is (cut_{j-1}, cut_j]. Coinciding cut
    points merge bins with a DegenerateCutsWarning, so fewer than strata - 1
    columns may come back.
    """
    pi = np.asarray(pi, dtype=float)
    if strata < 2:
        raise ValueError("strata must be at least 2")
    if pi.size < strata:
        raise TooFewUnits(f"{pi.size} units cannot fill {strata} strata")
    cuts = quantiles(pi, np.arange(1, strata) / strata)
    top = pi.max()
    kept = np.unique(cuts[cuts < top])
    if kept.size < strata - 1:
        warnings.warn(
            f"{strata - 1 - kept.size} of {strata - 1} quantile cut points coincide; strata merged",
            DegenerateCutsWarning,
            stacklevel=2,
        )
    # bin index 0 for pi <= kept[0], j for kept[j-1] < pi <= kept[j]
    bins = np.searchsorted(kept, pi, side="left")
    cols = [(bins == j).astype(float) for j in range(1, kept.size + 1)]
    if not cols:
        return np.empty((pi.size, 0))
    return np.column_stack(cols)


def make_squared_lp_basis(eta):
    eta = np.asarray(eta, dtype=float)
    return (eta**2)[:, None]
