"""Subsampled Laplace mechanism for adaptively chosen statistical queries.

Each query is answered from ``ell`` points drawn uniformly from the dataset,
plus Laplace noise of scale ``1/(ell * eps')`` with
``eps' = eps * n / (4 * ell * sqrt(2k * log(1/delta)))``. The work per query
is ``ell`` point evaluations, independent of ``n``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import InvalidParameterError, SampleSizeWarning
from .noise import sample_laplace
from .privacy import BudgetLedger, PrivacyParams, amplify_with_replacement, amplify_without_replacement
from .queries import Dataset, StatQuery, Transcript

Mode = Literal["high-probability", "in-expectation"]

# Slack for ceil() of a float that should land on an integer exactly.
_CEIL_RTOL = 1e-12


def _ceil(x: float) -> int:
    return math.ceil(x * (1 - _CEIL_RTOL))


def required_subsample_size(alpha: float, beta: float, k: int) -> int:
    """Smallest ell with ``ell >= 2 log(4k/beta) / alpha^2``."""
    return max(1, _ceil(2 * math.log(4 * k / beta) / alpha**2))


def per_query_epsilon(eps: float, delta: float, k: int, n: int, ell: int) -> float:
    """The eps' that calibrates the Laplace noise for one query."""
    return eps * n / (4 * ell * math.sqrt(2 * k * math.log(1 / delta)))


def sample_size_guidance(alpha: float, beta: float, k: int, eps: float, delta: float) -> float:
    """Dataset size at which the noise term alone meets the accuracy target.

    This is ``4 sqrt(2k log(1/delta)) log(2k/beta) / (alpha * eps)``.
    """
    return 4 * math.sqrt(2 * k * math.log(1 / delta)) * math.log(2 * k / beta) / (alpha * eps)


@dataclass(frozen=True)
class SqMechConfig:
    alpha: float
    beta: float
    k: int
    ell: int
    eps: float
    delta: float
    replacement: bool = False
    clip_output: bool = False
    mode: Mode = "high-probability"

    def __post_init__(self):
        if not (0 < self.alpha <= 1):
            raise InvalidParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0 < self.beta < 1):
            raise InvalidParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if self.k < 1 or self.ell < 1:
            raise InvalidParameterError("k and ell must be positive")
        if self.mode == "high-probability":
            expected = (self.alpha / 64, self.alpha * self.beta / 32)
            if self.ell < required_subsample_size(self.alpha, self.beta, self.k):
                raise InvalidParameterError(
                    f"ell={self.ell} is below 2 log(4k/beta)/alpha^2 for high-probability accuracy"
                )
        elif self.mode == "in-expectation":
            expected = (self.alpha / 8, self.alpha / 4)
        else:
            raise InvalidParameterError(f"unknown mode {self.mode!r}")
        if not (math.isclose(self.eps, expected[0]) and math.isclose(self.delta, expected[1])):
            raise InvalidParameterError(
                f"{self.mode} mode fixes (eps, delta) = {expected}, got ({self.eps}, {self.delta})"
            )

    def eps_prime(self, n: int) -> float:
        return per_query_epsilon(self.eps, self.delta, self.k, n, self.ell)

    def noise_scale(self, n: int) -> float:
        """Laplace scale ``1/(ell * eps')`` on a dataset of size n."""
        return 1.0 / (self.ell * self.eps_prime(n))

    def amplified_epsilon(self, n: int) -> float:
        """Privacy of one query after subsampling amplification of its eps'-private Laplace step."""
        amplify = amplify_with_replacement if self.replacement else amplify_without_replacement
        return amplify(self.eps_prime(n), self.ell, n)

    def expectation_terms(self, n: int) -> tuple[float, float]:
        """The two terms ``k^(1/4)/sqrt(n)`` and ``1/sqrt(ell)`` bounding in-expectation accuracy.

        Their constants and log factors are unspecified, so they are reported
        separately rather than combined into an accuracy claim.
        """
        return self.k**0.25 / math.sqrt(n), 1 / math.sqrt(self.ell)

    def ledger(self) -> BudgetLedger:
        return BudgetLedger(PrivacyParams(self.eps, self.delta), self.k)


def config_from_accuracy(
    alpha: float,
    beta: float,
    k: int,
    n: int,
    mode: Mode = "high-probability",
    ell: Optional[int] = None,
    replacement: bool = False,
    clip_output: bool = False,
) -> SqMechConfig:
    """Mechanism parameters for k queries at accuracy alpha and failure probability beta.

    High-probability mode picks ``ell = ceil(2 log(4k/beta)/alpha^2)``,
    ``eps = alpha/64``, ``delta = alpha*beta/32`` and warns (SampleSizeWarning)
    when ``n`` is below :func:`sample_size_guidance`. In-expectation mode uses
    ``eps = alpha/8``, ``delta = alpha/4`` and a caller-chosen ``ell``.
    """
    if not (0 < alpha <= 1):
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if not (0 < beta < 1):
        raise InvalidParameterError(f"beta must lie in (0, 1), got {beta}")
    if k < 1 or n < 1:
        raise InvalidParameterError("k and n must be positive")
    if mode == "high-probability":
        eps, delta = alpha / 64, alpha * beta / 32
        ell = required_subsample_size(alpha, beta, k) if ell is None else ell
    elif mode == "in-expectation":
        eps, delta = alpha / 8, alpha / 4
        if ell is None:
            raise InvalidParameterError("in-expectation mode needs an explicit ell")
    else:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    if not replacement and ell > n:
        raise InvalidParameterError(f"ell={ell} exceeds n={n} for sampling without replacement")
    cfg = SqMechConfig(alpha, beta, k, ell, eps, delta, replacement, clip_output, mode)
    if mode == "high-probability":
        guidance = sample_size_guidance(alpha, beta, k, eps, delta)
        if n < guidance:
            warnings.warn(
                f"n={n} is below the sample-size guidance {guidance:.0f} for alpha={alpha}, "
                f"beta={beta}, k={k}; answers may miss the accuracy target",
                SampleSizeWarning,
                stacklevel=2,
            )
    return cfg


def _partial_fisher_yates(n: int, ell: int, rng: np.random.Generator) -> np.ndarray:
    # Swaps are recorded in a dict, so only touched positions cost memory.
    targets = rng.integers(np.arange(ell), n).tolist()
    swapped: dict[int, int] = {}
    out = [0] * ell
    for i, j in enumerate(targets):
        at_j = swapped.get(j, j)
        swapped[j] = swapped.get(i, i)
        out[i] = at_j
    return np.asarray(out, dtype=np.int64)


def subsample_indices(n: int, ell: int, replacement: bool, rng: np.random.Generator) -> np.ndarray:
    if ell < 1:
        raise InvalidParameterError(f"subsample size must be at least 1, got {ell}")
    if replacement:
        return rng.integers(0, n, size=ell)
    if ell > n:
        raise InvalidParameterError(f"cannot draw {ell} points without replacement from {n}")
    return _partial_fisher_yates(n, ell, rng)


def subsample(data: Dataset, ell: int, replacement: bool, rng: np.random.Generator) -> Dataset:
    """Draw ``ell`` points uniformly, i.i.d. or as a uniform ell-subset."""
    return data.take(subsample_indices(data.n, ell, replacement, rng))


def answer_query(
    data: Dataset, q: StatQuery, cfg: SqMechConfig, ledger: BudgetLedger, rng: np.random.Generator
) -> float:
    """Answer one statistical query: ``q(S_ell) + Lap(1/(ell * eps'))``."""
    if not cfg.replacement and cfg.ell > data.n:
        raise InvalidParameterError(f"ell={cfg.ell} exceeds n={data.n} for sampling without replacement")
    ledger.charge()
    sub = subsample(data, cfg.ell, cfg.replacement, rng)
    answer = q.mean(sub.points) + sample_laplace(cfg.noise_scale(data.n), rng)
    if cfg.clip_output:
        answer = min(1.0, max(0.0, answer))
    return answer


class SqMechanism:
    """One sequential session of the subsampled Laplace mechanism over a dataset."""

    def __init__(self, data: Dataset, cfg: SqMechConfig, rng: np.random.Generator,
                 ledger: Optional[BudgetLedger] = None):
        self.data = data
        self.cfg = cfg
        self.rng = rng
        self.ledger = ledger if ledger is not None else cfg.ledger()
        self.transcript = Transcript()

    def answer(self, q: StatQuery) -> float:
        start = time.perf_counter_ns()
        a = answer_query(self.data, q, self.cfg, self.ledger, self.rng)
        self.transcript.append(q.name, a, self.cfg.ell, time.perf_counter_ns() - start)
        return a
