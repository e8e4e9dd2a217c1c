"""Privacy accounting: amplification by subsampling and adaptive composition.

Post-processing needs no code: anything computed from a mechanism's output
(clipping an answer, choosing a query from past answers) keeps the
mechanism's (eps, delta) guarantee, so no charge is made for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import BudgetExhaustedError, InvalidParameterError


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise InvalidParameterError(f"epsilon must be a finite nonnegative real, got {self.epsilon}")
        if not (0 <= self.delta < 1):
            raise InvalidParameterError(f"delta must lie in [0, 1), got {self.delta}")


def _check_counts(ell: int, n: int) -> None:
    if ell < 1:
        raise InvalidParameterError(f"subsample size must be at least 1, got {ell}")
    if n < 1:
        raise InvalidParameterError(f"dataset size must be at least 1, got {n}")


def amplify_without_replacement(eps: float, ell: int, n: int) -> float:
    """Privacy of an eps-private mechanism run on a uniform ell-subset of n points.

    Returns ``log(1 + (ell/n) * (e^eps - 1))``.
    """
    _check_counts(ell, n)
    if ell > n:
        raise InvalidParameterError(f"cannot draw {ell} distinct points from {n}")
    if eps < 0:
        raise InvalidParameterError(f"eps must be nonnegative, got {eps}")
    result = math.log1p(ell / n * math.expm1(eps))
    if eps <= 1:
        assert result <= 2 * ell / n * eps + 1e-15
    return result


def amplify_with_replacement(eps: float, ell: int, n: int) -> float:
    """Privacy of an eps-private mechanism run on ell i.i.d. draws from n points.

    Returns ``log(1 + (1 - (1 - 1/n)^ell) * (e^eps - 1))``.
    """
    _check_counts(ell, n)
    if eps < 0:
        raise InvalidParameterError(f"eps must be nonnegative, got {eps}")
    # probability that a fixed point is drawn at least once
    hit = 1.0 if n == 1 else -math.expm1(ell * math.log1p(-1.0 / n))
    result = math.log1p(hit * math.expm1(eps))
    if eps <= 1:
        assert result <= 2 * ell / n * eps + 1e-15
    return result


def compose_per_query_epsilon(target: PrivacyParams, k: int) -> float:
    """Per-query epsilon so that k adaptive eps'-private queries are (eps, delta)-private."""
    if k < 1:
        raise InvalidParameterError(f"k must be at least 1, got {k}")
    if target.delta <= 0:
        raise InvalidParameterError("composition needs delta > 0 (log(1/delta) is undefined at 0)")
    if not (0 < target.epsilon < 1):
        raise InvalidParameterError(f"composition is stated for 0 < epsilon < 1, got {target.epsilon}")
    return target.epsilon / (2 * math.sqrt(2 * k * math.log(1 / target.delta)))


@dataclass
class BudgetLedger:
    """Adaptive-composition budget for one session of at most ``k`` queries.

    The per-query mechanisms here are pure-eps, so the session's delta is the
    target delta alone. Charging is single-writer: the owning mechanism
    answers queries one at a time.
    """

    target: PrivacyParams
    k: int
    queries_used: int = 0
    per_query_epsilon: float = field(init=False)

    def __post_init__(self):
        self.per_query_epsilon = compose_per_query_epsilon(self.target, self.k)
        if not (0 <= self.queries_used <= self.k):
            raise InvalidParameterError(f"queries_used must lie in [0, {self.k}], got {self.queries_used}")

    @property
    def remaining(self) -> int:
        return self.k - self.queries_used

    @property
    def session_delta(self) -> float:
        return self.target.delta

    def charge(self, count: int = 1) -> "BudgetLedger":
        if count > self.remaining:
            raise BudgetExhaustedError(
                f"budget of {self.k} queries exhausted ({self.queries_used} used, {count} requested)"
            )
        self.queries_used += count
        return self


def ledger_charge(ledger: BudgetLedger) -> BudgetLedger:
    return ledger.charge()
