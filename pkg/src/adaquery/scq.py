"""Sampling counting queries (SCQs): one-bit answers read off a single sampled point.

``answer_scq`` samples one point s from S and releases q(s), flipped with a
small probability. Its expectation is ``(1 - p) i/n + p (n - i)/n`` for
``i = sum_s q(s)`` and flip probability p, so it is within p of q(S).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParameterError, SampleSizeWarning
from .noise import sample_laplace
from .privacy import BudgetLedger, PrivacyParams
from .queries import CountingQuery, Dataset, Transcript
from .sqmech import required_subsample_size


@dataclass(frozen=True)
class ScqConfig:
    """SCQ session parameters.

    ``flip_prob`` defaults to alpha/2: each SCQ is answered at accuracy alpha/2
    so the transfer to the distribution costs the other alpha/2.
    """

    alpha: float
    beta: float
    k: int
    flip_prob: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.alpha <= 0.5):
            raise InvalidParameterError(f"SCQ accuracy alpha must lie in (0, 1/2], got {self.alpha}")
        if not (0 < self.beta < 1):
            raise InvalidParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.k < 1:
            raise InvalidParameterError(f"k must be at least 1, got {self.k}")
        if self.flip_prob is None:
            object.__setattr__(self, "flip_prob", self.alpha / 2)
        if not (0 <= self.flip_prob <= 0.5):
            raise InvalidParameterError(f"flip probability must lie in [0, 1/2], got {self.flip_prob}")

    @property
    def eps(self) -> float:
        return self.alpha / 64

    @property
    def delta(self) -> float:
        return self.alpha * self.beta / 16

    def sample_size_guidance(self) -> float:
        """Largest of the two dataset-size requirements for distribution accuracy."""
        privacy_bound = 4 * math.sqrt(2 * self.k * math.log(1 / self.delta)) / (self.alpha * self.eps)
        transfer_bound = 1024 * math.log(self.k / self.beta) / self.alpha**2
        return max(privacy_bound, transfer_bound)

    def ledger(self, k: Optional[int] = None) -> BudgetLedger:
        return BudgetLedger(PrivacyParams(self.eps, self.delta), self.k if k is None else k)


def scq_config(alpha: float, beta: float, k: int, n: int) -> ScqConfig:
    """SCQ configuration with eps = alpha/64, delta = alpha*beta/16; warns if n is too small."""
    cfg = ScqConfig(alpha, beta, k)
    guidance = cfg.sample_size_guidance()
    if n < guidance:
        warnings.warn(
            f"n={n} is below the SCQ sample-size guidance {guidance:.0f} for alpha={alpha}, "
            f"beta={beta}, k={k}",
            SampleSizeWarning,
            stacklevel=2,
        )
    return cfg


def expected_scq_answer(ones: int, n: int, flip_prob: float) -> float:
    """Exact ``E[answer]`` for a dataset with ``ones`` of its n points satisfying q."""
    return ((1 - flip_prob) * ones + flip_prob * (n - ones)) / n


def answer_scq_many(
    data: Dataset, q: CountingQuery, cfg: ScqConfig, ledger: BudgetLedger,
    rng: np.random.Generator, calls: int,
) -> np.ndarray:
    """``calls`` independent SCQ answers to the same query, as an int array of bits.

    Each call samples its own point (with replacement across calls) and its
    own flip, evaluates q on exactly one point and charges the ledger once.
    """
    if calls < 1:
        raise InvalidParameterError(f"calls must be positive, got {calls}")
    ledger.charge(calls)
    idx = rng.integers(0, data.n, size=calls)
    bits = q(data.points[idx]).astype(np.int64)
    flips = rng.random(calls) < cfg.flip_prob
    return bits ^ flips


def answer_scq(
    data: Dataset, q: CountingQuery, cfg: ScqConfig, ledger: BudgetLedger, rng: np.random.Generator
) -> int:
    """Answer one SCQ with a single bit whose mean is within flip_prob of q(S)."""
    return int(answer_scq_many(data, q, cfg, ledger, rng, 1)[0])


def counting_via_scq(
    data: Dataset, q: CountingQuery, ell: int, cfg: ScqConfig, ledger: BudgetLedger,
    rng: np.random.Generator,
) -> float:
    """Estimate q as the mean of ``ell`` SCQ answers; always a multiple of 1/ell."""
    if ell < 1:
        raise InvalidParameterError(f"ell must be positive, got {ell}")
    if ledger.remaining < ell:
        ledger.charge(ell)  # raises with the budget details
    return int(answer_scq_many(data, q, cfg, ledger, rng, ell).sum()) / ell


def counting_subsample_size(alpha: float, beta: float, k: int) -> int:
    """Number of SCQs per counting query: ``ceil(2 log(4k/beta)/alpha^2)``."""
    return required_subsample_size(alpha, beta, k)


def naive_scq_via_count(data: Dataset, q: CountingQuery, eps_pq: float, rng: np.random.Generator) -> int:
    """Baseline SCQ: exact q(S) over all n points, Laplace noise, clamp, then a coin flip."""
    noisy = q.mean(data.points) + sample_laplace(1.0 / (data.n * eps_pq), rng)
    return int(rng.random() < min(1.0, max(0.0, noisy)))


class ScqMechanism:
    """A session answering SCQs (or counting queries built from them) over one dataset."""

    def __init__(self, data: Dataset, cfg: ScqConfig, rng: np.random.Generator,
                 ledger: Optional[BudgetLedger] = None, ell: Optional[int] = None):
        self.data = data
        self.cfg = cfg
        self.rng = rng
        self.ell = ell
        self.ledger = ledger if ledger is not None else cfg.ledger(cfg.k * (ell or 1))
        self.transcript = Transcript()

    def answer(self, q: CountingQuery) -> float:
        """A single SCQ bit, or the ell-SCQ count estimate when the session has an ell."""
        start = time.perf_counter_ns()
        if self.ell is None:
            a, examined = answer_scq(self.data, q, self.cfg, self.ledger, self.rng), 1
        else:
            a = counting_via_scq(self.data, q, self.ell, self.cfg, self.ledger, self.rng)
            examined = self.ell
        self.transcript.append(q.name, a, examined, time.perf_counter_ns() - start)
        return a
