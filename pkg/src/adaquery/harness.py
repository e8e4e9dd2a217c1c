"""Test harness: known distributions, adaptive adversaries and the monitor.

Everything here may look at the true distribution D, so none of it belongs on
a privacy-facing code path. Adversaries are generators: they ``yield`` a
query and receive the mechanism's answer through ``send``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Generator, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError
from .noise import exp_mechanism_select
from .queries import CountingQuery, Dataset, StatQuery, Transcript
from .scq import ScqMechanism, counting_subsample_size, scq_config
from .sqmech import SqMechanism, config_from_accuracy

Adversary = Generator[StatQuery, float, None]

# Pinned by scripts/calibrate_attack.py (output in calibration/attack.json):
# the 1% quantile of the naive mechanism's phase-2 error over 1000 trials,
# rounded down to two significant figures.
NAIVE_ATTACK_THRESHOLD = {
    # (universe_size, n, k): threshold
    (512, 1000, 500): 0.15,
    (512, 20000, 50): 0.0088,
}


@dataclass(frozen=True)
class KnownDistribution:
    """A distribution over the finite universe ``{0, ..., len(weights) - 1}``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidParameterError("weights must be a nonempty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InvalidParameterError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, size: int) -> "KnownDistribution":
        return cls(np.full(size, 1.0 / size))

    @property
    def universe_size(self) -> int:
        return len(self.weights)

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        """An i.i.d. sample S ~ D^n."""
        m = self.universe_size
        if np.all(self.weights == self.weights[0]):
            points = rng.integers(0, m, size=n)
        else:
            points = rng.choice(m, size=n, p=self.weights)
        return Dataset(points, universe_size=m)


def exact_query_mean(dist: KnownDistribution, q: StatQuery) -> float:
    """q(D) by brute force over the universe. Does not touch ``q.eval_count``."""
    values = np.asarray(q.fn(np.arange(dist.universe_size)), dtype=float)
    return float(np.dot(dist.weights, values))


def naive_empirical_answer(data: Dataset, q: StatQuery) -> float:
    """The exact empirical mean q(S), evaluating every one of the n points."""
    return q.mean(data.points)


class EmpiricalMechanism:
    """Answers every query with q(S) exactly: no noise, no subsampling, no budget."""

    def __init__(self, data: Dataset):
        self.data = data
        self.transcript = Transcript()

    def answer(self, q: StatQuery) -> float:
        start = time.perf_counter_ns()
        a = naive_empirical_answer(self.data, q)
        self.transcript.append(q.name, a, self.data.n, time.perf_counter_ns() - start)
        return a


def random_balanced_query(universe_size: int, rng: np.random.Generator, name=None) -> CountingQuery:
    """A counting query equal to 1 on a uniformly random half of the universe."""
    table = np.zeros(universe_size)
    table[rng.permutation(universe_size)[: universe_size // 2]] = 1.0
    return CountingQuery.from_table(table, name=name)


def random_biased_query(universe_size: int, p: float, rng: np.random.Generator, name=None) -> CountingQuery:
    """A counting query with each q(x) ~ Bernoulli(p) independently (the coin workload)."""
    return CountingQuery.from_table((rng.random(universe_size) < p).astype(float), name=name)


def coin_workload(universe_size: int, k: int, alpha: float, rng: np.random.Generator) -> list[CountingQuery]:
    """k non-adaptive queries, each a coin of bias 1/2 or 1/2 + 4 alpha chosen at random."""
    biases = np.where(rng.random(k) < 0.5, 0.5, 0.5 + 4 * alpha)
    return [random_biased_query(universe_size, p, rng, name=f"coin{i}") for i, p in enumerate(biases)]


def majority_attack(universe_size: int, k: int, rng: np.random.Generator) -> Adversary:
    """Sign-correlation attack: k - 1 random balanced queries, then their weighted majority.

    Each balanced query has mean exactly 1/2 under the uniform distribution, so
    an answer above 1/2 says the sample over-represents the query's support.
    Every point collects a +1/-1 vote from each answer; the final query is 1
    on the points with a positive vote total.
    """
    if k < 2:
        raise InvalidParameterError(f"the attack needs k >= 2, got {k}")
    votes = np.zeros(universe_size)
    for i in range(k - 1):
        q = random_balanced_query(universe_size, rng, name=f"probe{i}")
        answer = yield q
        votes += np.sign(answer - 0.5) * (2 * q.table - 1)
    yield CountingQuery.from_table((votes > 0).astype(float), name="final")


def non_adaptive_attack(queries: Sequence[StatQuery]) -> Adversary:
    for q in queries:
        yield q


@dataclass
class AttackState:
    queries: list = field(default_factory=list)
    answers: list = field(default_factory=list)


def interact(mechanism, adversary: Adversary) -> AttackState:
    """Run an adversary against a mechanism session until the adversary stops."""
    state = AttackState()
    try:
        q = next(adversary)
        while True:
            a = mechanism.answer(q)
            state.queries.append(q)
            state.answers.append(a)
            q = adversary.send(a)
    except StopIteration:
        pass
    return state


MECHANISMS = ("naive-empirical", "alg1", "scq")


def make_mechanism(kind: str, data: Dataset, k: int, rng: np.random.Generator,
                   alpha: float = 0.2, beta: float = 0.1, **options):
    """Build a session of the named mechanism for k queries over ``data``.

    ``alg1`` uses the high-probability configuration for (alpha, beta, k);
    ``scq`` answers each counting query with ``ceil(2 log(4k/beta)/alpha^2)``
    SCQs. Extra keyword options go to the sq configuration.
    """
    if kind == "naive-empirical":
        return EmpiricalMechanism(data)
    if kind == "alg1":
        cfg = config_from_accuracy(alpha, beta, k, data.n, **options)
        return SqMechanism(data, cfg, rng)
    if kind == "scq":
        cfg = scq_config(alpha, beta, k, data.n)
        return ScqMechanism(data, cfg, rng, ell=counting_subsample_size(alpha, beta, k))
    raise InvalidParameterError(f"unknown mechanism {kind!r}; expected one of {MECHANISMS}")


def run_overfitting_attack(
    mechanism: str, dist: KnownDistribution, n: int, k: int, rng: np.random.Generator, **params
) -> tuple[float, Transcript]:
    """Run the majority attack; return |final answer - q_k(D)| and the session transcript."""
    data = dist.sample(n, rng)
    mech = make_mechanism(mechanism, data, k, rng, **params)
    state = interact(mech, majority_attack(dist.universe_size, k, rng))
    final = state.queries[-1]
    return abs(state.answers[-1] - exact_query_mean(dist, final)), mech.transcript


def session_errors(state: AttackState, dist: KnownDistribution) -> np.ndarray:
    """|a_i - q_i(D)| for every query of a finished interaction."""
    return np.array([abs(a - exact_query_mean(dist, q)) for q, a in zip(state.queries, state.answers)])


@dataclass
class MonitorRecord:
    queries: list           # queries[t][i]
    utilities: np.ndarray   # shape (T, k): |q_{t,i}(S_t) - q_{t,i}(D)|
    selected: tuple         # (t, i)
    eta: float

    @property
    def selected_utility(self) -> float:
        return float(self.utilities[self.selected])

    @property
    def max_utility(self) -> float:
        return float(self.utilities.max())


def run_monitor(
    mech_factory: Callable[[Dataset, np.random.Generator], object],
    adversary_factory: Callable[[np.random.Generator], Adversary],
    dist: KnownDistribution,
    n: int,
    T: int,
    eps: float,
    rng: np.random.Generator,
) -> MonitorRecord:
    """Simulate T independent sessions and select a (query, round) pair by the exponential mechanism.

    The utility of query i in round t is how far its empirical value on S_t is
    from its true value; the selection weight is ``exp(eps * n * u / 2)``.
    """
    if T < 1:
        raise InvalidParameterError(f"T must be at least 1, got {T}")
    rounds, utilities = [], []
    for _ in range(T):
        data = dist.sample(n, rng)
        state = interact(mech_factory(data, rng), adversary_factory(rng))
        rounds.append(state.queries)
        utilities.append([
            abs(float(np.mean(q.fn(data.points))) - exact_query_mean(dist, q)) for q in state.queries
        ])
    if len({len(u) for u in utilities}) != 1:
        raise InvalidParameterError("the adversary must issue the same number of queries every round")
    u = np.array(utilities)
    eta = eps * n / 2
    items = [((t, i), u[t, i]) for t in range(u.shape[0]) for i in range(u.shape[1])]
    return MonitorRecord(rounds, u, exp_mechanism_select(items, eta, rng), eta)


def selection_utility_gap(eps: float, n: int, k: int, T: int) -> float:
    """How far below the maximum utility the selected utility may fall in expectation."""
    return 2 / (eps * n) * math.log(k * T)
