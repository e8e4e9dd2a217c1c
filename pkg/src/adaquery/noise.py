"""Randomness primitives: Laplace sampling and exponential-mechanism selection.

Every function takes an explicit ``numpy.random.Generator``; nothing here
touches global random state, so a seeded generator reproduces a draw sequence
exactly.
"""

from __future__ import annotations

import math
from typing import Hashable, Sequence

import numpy as np

from .errors import InvalidParameterError

_MANTISSA = 2**53


def _open_uniform(rng: np.random.Generator, size=None):
    # Uniform on the open interval (0, 1): the inverse CDF is infinite at both ends.
    return (rng.integers(0, _MANTISSA, size=size) + 0.5) / _MANTISSA


def sample_laplace(scale: float, rng: np.random.Generator, size=None):
    """Draw from the zero-mean Laplace distribution with scale ``scale``.

    Uses the inverse CDF ``F^-1(p) = -b * sign(p - 1/2) * log(1 - 2|p - 1/2|)``.
    Returns a float when ``size`` is None, else an array of that shape.
    """
    scale = float(scale)
    if not (scale > 0 and math.isfinite(scale)):
        raise InvalidParameterError(f"Laplace scale must be positive and finite, got {scale}")
    u = _open_uniform(rng, size) - 0.5
    draw = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if size is None:
        return float(draw)
    return draw


def exp_mechanism_probabilities(utilities: Sequence[float], eta: float) -> np.ndarray:
    """Selection probabilities ``exp(eta*u) / sum exp(eta*u')``, shifted by max(u)."""
    u = np.asarray(utilities, dtype=float)
    if u.ndim != 1 or u.size == 0:
        raise InvalidParameterError("exponential mechanism needs a nonempty list of utilities")
    if not np.all(np.isfinite(u)):
        raise InvalidParameterError("utilities must be finite")
    if not (eta > 0 and math.isfinite(eta)):
        raise InvalidParameterError(f"eta must be positive and finite, got {eta}")
    weights = np.exp(eta * (u - u.max()))
    return weights / weights.sum()


def exp_mechanism_select(
    items: Sequence[tuple[Hashable, float]], eta: float, rng: np.random.Generator
) -> Hashable:
    """Pick one id from ``(id, utility)`` pairs with probability proportional to exp(eta*u).

    Callers running the monitor set ``eta = eps * n / 2``.
    """
    if len(items) == 0:
        raise InvalidParameterError("exponential mechanism needs at least one item")
    ids = [item[0] for item in items]
    probs = exp_mechanism_probabilities([item[1] for item in items], eta)
    return ids[int(rng.choice(len(ids), p=probs))]
