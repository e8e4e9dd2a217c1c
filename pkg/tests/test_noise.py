import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from adaquery.errors import InvalidParameterError
from adaquery.noise import exp_mechanism_probabilities, exp_mechanism_select, sample_laplace


@pytest.mark.parametrize("scale", [0.01, 0.5, 1.0, 3.0])
def test_laplace_matches_reference_distribution(scale):
    draws = sample_laplace(scale, np.random.default_rng(7), size=50_000)
    result = stats.kstest(draws, stats.laplace(scale=scale).cdf)
    assert result.pvalue > 1e-3


def test_laplace_mean_absolute_value_equals_scale():
    # E|Lap(b)| = b; the standard error of the mean of |X| is b/sqrt(N).
    draws = sample_laplace(2.0, np.random.default_rng(1), size=400_000)
    assert abs(np.abs(draws).mean() - 2.0) < 4 * 2.0 / math.sqrt(draws.size)


def test_laplace_scalar_and_array_shapes(rng):
    assert isinstance(sample_laplace(1.0, rng), float)
    assert sample_laplace(1.0, rng, size=(3, 4)).shape == (3, 4)


def test_laplace_is_finite_at_extreme_uniforms():
    # Tiny scale with many draws: no draw may be infinite.
    assert np.all(np.isfinite(sample_laplace(1e-300, np.random.default_rng(0), size=100_000)))


@pytest.mark.parametrize("scale", [0.0, -1.0, math.inf, math.nan])
def test_laplace_rejects_bad_scale(scale, rng):
    with pytest.raises(InvalidParameterError):
        sample_laplace(scale, rng)


def test_same_seed_same_draws():
    a = sample_laplace(1.0, np.random.default_rng(99), size=10)
    b = sample_laplace(1.0, np.random.default_rng(99), size=10)
    assert np.array_equal(a, b)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20), st.floats(0.01, 50))
def test_exp_mechanism_probabilities_are_a_distribution(utilities, eta):
    p = exp_mechanism_probabilities(utilities, eta)
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(p >= 0)
    # Higher utility never gets lower probability.
    order = np.argsort(utilities, kind="stable")
    assert np.all(np.diff(p[order]) >= -1e-15)


def test_exp_mechanism_probabilities_match_direct_formula():
    u = np.array([0.1, 0.5, 0.2])
    eta = 3.0
    direct = np.exp(eta * u) / np.exp(eta * u).sum()
    assert np.allclose(exp_mechanism_probabilities(u, eta), direct, rtol=1e-14)


def test_exp_mechanism_survives_huge_eta():
    p = exp_mechanism_probabilities([0.0, 1.0], 1e6)
    assert p[1] == 1.0 and p[0] == 0.0


@pytest.mark.parametrize("bad", [[], [math.nan], [math.inf, 0.0]])
def test_exp_mechanism_rejects_bad_utilities(bad):
    with pytest.raises(InvalidParameterError):
        exp_mechanism_probabilities(bad, 1.0)


def test_exp_mechanism_rejects_bad_eta():
    with pytest.raises(InvalidParameterError):
        exp_mechanism_probabilities([0.0], 0.0)


def test_exp_mechanism_select_frequencies():
    items = [("a", 0.0), ("b", 1.0), ("c", 2.0)]
    eta = 0.7
    rng = np.random.default_rng(3)
    picks = [exp_mechanism_select(items, eta, rng) for _ in range(30_000)]
    expected = exp_mechanism_probabilities([0.0, 1.0, 2.0], eta) * len(picks)
    observed = [picks.count(k) for k in "abc"]
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_exp_mechanism_select_rejects_empty(rng):
    with pytest.raises(InvalidParameterError):
        exp_mechanism_select([], 1.0, rng)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_exp_mechanism_select_returns_a_given_id(seed):
    items = [((0, 1), 0.3), ((2, 5), 0.1)]
    assert exp_mechanism_select(items, 2.0, np.random.default_rng(seed)) in {(0, 1), (2, 5)}
