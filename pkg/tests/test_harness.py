import math
import warnings

import numpy as np
import pytest

from adaquery.errors import InvalidParameterError, SampleSizeWarning
from adaquery.harness import (
    NAIVE_ATTACK_THRESHOLD,
    EmpiricalMechanism,
    KnownDistribution,
    coin_workload,
    exact_query_mean,
    interact,
    majority_attack,
    make_mechanism,
    naive_empirical_answer,
    non_adaptive_attack,
    random_balanced_query,
    run_monitor,
    run_overfitting_attack,
    selection_utility_gap,
    session_errors,
)
from adaquery.queries import CountingQuery, Dataset, StatQuery
from adaquery.sqmech import config_from_accuracy, sample_size_guidance


def test_distribution_validation():
    with pytest.raises(InvalidParameterError):
        KnownDistribution(np.array([0.5, 0.6]))
    with pytest.raises(InvalidParameterError):
        KnownDistribution(np.array([1.5, -0.5]))
    KnownDistribution(np.array([0.25, 0.75]))


def test_exact_mean_trivial_cases():
    bit = CountingQuery.from_table([0, 1, 0, 1], name="bit")
    assert exact_query_mean(KnownDistribution.uniform(4), bit) == 0.5
    point_mass = KnownDistribution(np.array([0.0, 0.0, 1.0, 0.0]))
    q = StatQuery.from_table([0.1, 0.2, 0.7, 0.9], name="v")
    assert exact_query_mean(point_mass, q) == 0.7


def test_exact_mean_matches_reordered_summation():
    rng = np.random.default_rng(4)
    w = rng.random(100)
    w /= w.sum()
    values = rng.random(100)
    q = StatQuery.from_table(values, name="r")
    reordered = math.fsum(w[i] * values[i] for i in rng.permutation(100))
    assert abs(exact_query_mean(KnownDistribution(w), q) - reordered) < 1e-12
    assert q.eval_count == 0


def test_naive_answer_examples():
    data = Dataset(np.arange(1000) % 2, universe_size=2)
    ones = CountingQuery.from_table([1, 1], name="ones")
    assert naive_empirical_answer(data, ones) == 1.0 and ones.eval_count == 1000
    assert naive_empirical_answer(data, CountingQuery.from_table([0, 1], name="odd")) == 0.5


def test_naive_answer_matches_reordered_summation():
    rng = np.random.default_rng(8)
    table = rng.random(50)
    data = Dataset(rng.integers(0, 50, size=1000), universe_size=50)
    q = StatQuery.from_table(table, name="r")
    reference = math.fsum(table[p] for p in data.points[::-1]) / 1000
    assert abs(naive_empirical_answer(data, q) - reference) < 1e-12


def test_sampling_follows_weights():
    dist = KnownDistribution(np.array([0.1, 0.2, 0.7]))
    data = dist.sample(100_000, np.random.default_rng(0))
    freq = np.bincount(data.points, minlength=3) / data.n
    assert np.allclose(freq, dist.weights, atol=0.01)


def test_balanced_query_has_mean_one_half(rng):
    q = random_balanced_query(512, rng)
    assert q.table.sum() == 256
    assert exact_query_mean(KnownDistribution.uniform(512), q) == 0.5


def test_coin_workload_biases(rng):
    queries = coin_workload(2000, 40, 0.1, rng)
    means = [q.table.mean() for q in queries]
    assert all(abs(m - 0.5) < 0.05 or abs(m - 0.9) < 0.05 for m in means)


def test_attack_requires_two_queries(rng):
    with pytest.raises(InvalidParameterError):
        next(majority_attack(16, 1, rng))


def test_attack_final_query_is_a_function_of_the_transcript():
    # Replaying the same answers against the same probe randomness gives the same final query.
    finals = []
    for _ in range(2):
        rng = np.random.default_rng(10)
        adversary = majority_attack(64, 6, rng)
        q = next(adversary)
        answer_rng = np.random.default_rng(99)
        while q.name != "final":
            q = adversary.send(float(answer_rng.random()))
        finals.append(q.table.copy())
    assert np.array_equal(finals[0], finals[1])


def test_interact_records_every_exchange(rng):
    data = Dataset(rng.integers(0, 32, size=100), universe_size=32)
    queries = [random_balanced_query(32, rng, name=f"n{i}") for i in range(5)]
    state = interact(EmpiricalMechanism(data), non_adaptive_attack(queries))
    assert len(state.queries) == len(state.answers) == 5
    assert session_errors(state, KnownDistribution.uniform(32)).shape == (5,)


def test_naive_mechanism_overfits_under_attack():
    threshold = NAIVE_ATTACK_THRESHOLD[(512, 1000, 500)]
    assert threshold >= 0.15
    dist = KnownDistribution.uniform(512)
    rng = np.random.default_rng(2024)
    errors = [run_overfitting_attack("naive-empirical", dist, 1000, 500, rng)[0] for _ in range(100)]
    assert np.mean(np.array(errors) >= threshold) >= 0.9


def test_alg1_resists_attack_at_sufficient_sample_size():
    # n at the sample-size guidance for alpha = 0.2, beta = 0.1, k = 50.
    n = math.ceil(sample_size_guidance(0.2, 0.1, 50, 0.2 / 64, 0.2 * 0.1 / 32))
    dist = KnownDistribution.uniform(512)
    rng = np.random.default_rng(77)
    errors = [run_overfitting_attack("alg1", dist, n, 50, rng, alpha=0.2, beta=0.1)[0] for _ in range(100)]
    assert np.mean(np.array(errors) <= 0.2) >= 0.9


@pytest.mark.parametrize("mechanism", ["naive-empirical", "alg1"])
def test_two_queries_leave_nothing_to_exploit(mechanism):
    # High-probability constants need n far above 1e4, so alg1 runs in-expectation with ell = 2000.
    dist = KnownDistribution.uniform(512)
    rng = np.random.default_rng(31)
    params = dict(alpha=0.5, beta=0.1, mode="in-expectation", ell=2000) if mechanism == "alg1" else {}
    errors = [run_overfitting_attack(mechanism, dist, 10_000, 2, rng, **params)[0] for _ in range(200)]
    assert np.mean(np.array(errors) <= 0.1) >= 0.95


def test_make_mechanism_kinds(rng):
    data = Dataset(rng.integers(0, 8, size=100_000), universe_size=8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleSizeWarning)
        assert make_mechanism("alg1", data, 5, rng).cfg.ell == config_from_accuracy(0.2, 0.1, 5, 10**9).ell
        assert make_mechanism("scq", data, 5, rng).ell == 2 * 0 + config_from_accuracy(0.2, 0.1, 5, 10**9).ell
    with pytest.raises(InvalidParameterError):
        make_mechanism("oracle", data, 5, rng)


def _constant_adversary(k):
    def factory(rng):
        return non_adaptive_attack([CountingQuery.from_table(np.zeros(16), name=f"z{i}") for i in range(k)])
    return factory


def test_monitor_single_pair_is_always_selected(rng):
    dist = KnownDistribution.uniform(16)
    record = run_monitor(lambda d, r: EmpiricalMechanism(d), _constant_adversary(1), dist, 50, 1, 0.5, rng)
    assert record.selected == (0, 0) and record.utilities.shape == (1, 1)
    assert record.eta == 0.5 * 50 / 2


def test_monitor_equal_utilities_select_uniformly():
    dist = KnownDistribution.uniform(16)
    rng = np.random.default_rng(3)
    T, k, runs = 2, 3, 10_000
    counts = np.zeros((T, k))
    for _ in range(runs):
        record = run_monitor(lambda d, r: EmpiricalMechanism(d), _constant_adversary(k), dist, 20, T, 0.5, rng)
        counts[record.selected] += 1
    p = 1 / (T * k)
    stderr = math.sqrt(p * (1 - p) / runs)
    assert np.all(np.abs(counts / runs - p) <= 3 * stderr)


def test_monitor_rejects_zero_rounds(rng):
    with pytest.raises(InvalidParameterError):
        run_monitor(lambda d, r: EmpiricalMechanism(d), _constant_adversary(1), KnownDistribution.uniform(4),
                    10, 0, 0.5, rng)


def test_selection_gap_formula():
    assert selection_utility_gap(0.5, 1000, 10, 5) == pytest.approx(2 / 500 * math.log(50))
