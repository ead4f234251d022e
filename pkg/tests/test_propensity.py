import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drmean.errors import DegenerateCutsWarning, EpsilonOutOfRange, KnotsNotIncreasing, TooFewUnits
from drmean.propensity import (
    BasisSpec,
    make_propensity_scores,
    make_quintile_indicator_basis,
    make_spline_basis,
    make_squared_lp_basis,
    quintile_knots,
)


def test_scores_unclipped():
    ps = make_propensity_scores(np.array([0.2, 0.5, 0.9]), 1e-6)
    np.testing.assert_array_equal(ps.pi_hat, [0.2, 0.5, 0.9])
    np.testing.assert_allclose(ps.eta_hat, [math.log(0.25), 0.0, math.log(9)], atol=1e-14)
    assert ps.n_clipped == 0


def test_scores_clipped():
    ps = make_propensity_scores(np.array([1e-9, 0.5, 1 - 1e-12]), 1e-6)
    assert ps.pi_hat[0] == 1e-6
    assert ps.pi_hat[2] == 1 - 1e-6
    assert ps.n_clipped == 2
    np.testing.assert_allclose(ps.eta_hat, np.log(ps.pi_hat / (1 - ps.pi_hat)))


def test_logit_of_point_eight():
    assert make_propensity_scores(np.array([0.8])).eta_hat[0] == pytest.approx(1.386294, abs=1e-6)


def test_idempotent():
    p = np.array([1e-8, 0.3, 0.999999999])
    once = make_propensity_scores(p, 1e-4)
    twice = make_propensity_scores(once.pi_hat, 1e-4)
    np.testing.assert_array_equal(once.pi_hat, twice.pi_hat)
    np.testing.assert_array_equal(once.eta_hat, twice.eta_hat)


@pytest.mark.parametrize("eps", [0, 0.5, -1e-3])
def test_epsilon_range(eps):
    with pytest.raises(EpsilonOutOfRange):
        make_propensity_scores(np.array([0.5]), eps)


def test_spline_rows():
    knots = np.array([-1.0, 0.0, 1.0, 2.0])
    B = make_spline_basis(np.array([-1.0, -5.0, 3.0]), knots)
    np.testing.assert_array_equal(B[0], 0)
    np.testing.assert_array_equal(B[1], 0)
    np.testing.assert_array_equal(B[2], [4, 3, 2, 1])


def test_spline_knots_checked():
    with pytest.raises(KnotsNotIncreasing):
        make_spline_basis(np.zeros(3), [0.0, 0.0, 1.0])
    with pytest.raises(KnotsNotIncreasing):
        BasisSpec(knots=[1.0, 0.5])


@given(st.lists(st.floats(-20, 20), min_size=5, max_size=50))
def test_spline_properties(etas):
    eta = np.sort(np.array(etas))
    knots = np.unique(quintile_knots(eta))
    B = make_spline_basis(eta, knots)
    assert np.all(B >= 0)
    assert np.all(np.diff(B, axis=0) >= -1e-12)
    assert np.all(B[:, :-1] >= B[:, 1:] - 1e-12)


def test_quintile_two_per_bin():
    B = make_quintile_indicator_basis(np.arange(1, 11) / 10, 5)
    assert B.shape == (10, 4)
    np.testing.assert_array_equal(B.sum(axis=0), [2, 2, 2, 2])
    assert B[:2].sum() == 0


def test_quintile_degenerate():
    with pytest.warns(DegenerateCutsWarning):
        B = make_quintile_indicator_basis(np.full(8, 0.3), 5)
    assert B.shape == (8, 0)


def test_two_strata():
    np.testing.assert_array_equal(make_quintile_indicator_basis(np.array([0.1, 0.9]), 2), [[0], [1]])


def test_too_few_units():
    with pytest.raises(TooFewUnits):
        make_quintile_indicator_basis(np.array([0.1, 0.2]), 5)


@given(st.lists(st.floats(0.01, 0.99), min_size=5, max_size=60))
def test_indicator_rows(pis):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateCutsWarning)
        B = make_quintile_indicator_basis(np.array(pis), 5)
    assert np.all(B.sum(axis=1) <= 1)


@pytest.mark.parametrize("eta,expected", [(0.0, 0.0), (-2.0, 4.0), (1.5, 2.25)])
def test_squared(eta, expected):
    assert make_squared_lp_basis(np.array([eta]))[0, 0] == expected
