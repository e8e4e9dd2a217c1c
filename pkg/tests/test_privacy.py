import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from adaquery.errors import BudgetExhaustedError, InvalidParameterError
from adaquery.privacy import (
    BudgetLedger,
    PrivacyParams,
    amplify_with_replacement,
    amplify_without_replacement,
    compose_per_query_epsilon,
    ledger_charge,
)

GRID = list(itertools.product([0.1, 0.5, 1.0], [0.001, 0.01, 0.1], [1000, 20000, 10**6]))


@pytest.mark.parametrize("eps, ratio, n", GRID)
def test_amplification_matches_high_precision(eps, ratio, n):
    ell = round(ratio * n)
    assert oracles.close(amplify_without_replacement(eps, ell, n), oracles.amplified_without(eps, ell, n))
    assert oracles.close(amplify_with_replacement(eps, ell, n), oracles.amplified_with(eps, ell, n))


@given(st.floats(0, 1), st.integers(1, 10**6), st.integers(1, 10**6))
def test_amplification_bound_for_eps_at_most_one(eps, ell, n):
    ell = min(ell, n)
    bound = 2 * ell / n * eps
    assert amplify_without_replacement(eps, ell, n) <= bound + 1e-15
    assert amplify_with_replacement(eps, ell, n) <= bound + 1e-15


@given(st.floats(0, 5), st.integers(1, 1000), st.integers(1, 1000))
def test_amplification_never_exceeds_base_epsilon(eps, ell, n):
    ell = min(ell, n)
    assert amplify_without_replacement(eps, ell, n) <= eps * (1 + 1e-12) + 1e-300
    assert amplify_with_replacement(eps, ell, n) <= eps * (1 + 1e-12) + 1e-300


def test_with_replacement_amplifies_at_least_as_much():
    # A fixed point is hit with probability 1 - (1-1/n)^ell <= ell/n.
    for eps, ell, n in [(0.5, 10, 100), (1.0, 381, 20000), (2.0, 999, 1000)]:
        assert amplify_with_replacement(eps, ell, n) <= amplify_without_replacement(eps, ell, n)


def test_full_sample_has_no_amplification():
    assert amplify_without_replacement(0.7, 50, 50) == pytest.approx(0.7, rel=1e-15)
    assert amplify_with_replacement(0.7, 3, 1) == pytest.approx(0.7, rel=1e-15)


def test_with_replacement_allows_ell_above_n():
    assert amplify_with_replacement(0.5, 200, 100) < 0.5


@pytest.mark.parametrize("eps, ell, n", [(0.5, 0, 10), (0.5, 11, 10), (-0.1, 1, 10), (0.5, 1, 0)])
def test_amplification_rejects_bad_arguments(eps, ell, n):
    with pytest.raises(InvalidParameterError):
        amplify_without_replacement(eps, ell, n)


@pytest.mark.parametrize("eps, delta, k", [(0.5, 1e-6, 1), (0.1, 0.001, 50), (0.9, 0.1, 10**4)])
def test_composition_matches_high_precision(eps, delta, k):
    value = compose_per_query_epsilon(PrivacyParams(eps, delta), k)
    assert oracles.close(value, oracles.per_query_composed(eps, delta, k))


@pytest.mark.parametrize("eps, delta", [(1.0, 0.1), (0.0, 0.1), (0.5, 0.0)])
def test_composition_rejects_out_of_range(eps, delta):
    with pytest.raises(InvalidParameterError):
        compose_per_query_epsilon(PrivacyParams(eps, delta), 10)


def test_composition_rejects_zero_queries():
    with pytest.raises(InvalidParameterError):
        compose_per_query_epsilon(PrivacyParams(0.5, 0.01), 0)


@pytest.mark.parametrize("eps, delta", [(-1.0, 0.0), (math.inf, 0.0), (0.5, 1.0), (0.5, -0.1)])
def test_privacy_params_validation(eps, delta):
    with pytest.raises(InvalidParameterError):
        PrivacyParams(eps, delta)


def test_ledger_charges_until_exhausted():
    ledger = BudgetLedger(PrivacyParams(0.5, 0.01), k=3)
    ledger_charge(ledger)
    ledger.charge(2)
    assert ledger.remaining == 0
    with pytest.raises(BudgetExhaustedError):
        ledger_charge(ledger)
    assert ledger.queries_used == 3


def test_ledger_refuses_partial_batch():
    ledger = BudgetLedger(PrivacyParams(0.5, 0.01), k=5)
    ledger.charge(4)
    with pytest.raises(BudgetExhaustedError):
        ledger.charge(2)
    assert ledger.remaining == 1


def test_ledger_reports_composition_values():
    ledger = BudgetLedger(PrivacyParams(0.2, 0.05), k=40)
    assert ledger.per_query_epsilon == compose_per_query_epsilon(PrivacyParams(0.2, 0.05), 40)
    assert ledger.session_delta == 0.05
