"""Projected gradient descent with every gradient coordinate answered by the sq mechanism.

A loss is *statistical* when each gradient coordinate is an average over the
dataset of a bounded per-point quantity. Each coordinate is affinely encoded
into [0, 1], answered as a statistical query (in-expectation configuration,
no clipping), and decoded back. One optimization query therefore spends
``T * d`` oracle rounds.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .errors import BudgetExhaustedError, InvalidParameterError, SampleSizeWarning
from .queries import Dataset, StatQuery
from .sqmech import SqMechanism, config_from_accuracy

Mode = Literal["convex", "strongly-convex"]


@dataclass
class LossSpec:
    """A loss whose gradient is statistical.

    ``point_grad(points, x, i)`` gives coordinate i of each point's gradient at x,
    with values in ``[grad_lo[i], grad_hi[i]]``. ``point_loss(points, x)`` gives
    each point's loss (needed for boosting and excess-loss reports).
    """

    d: int
    point_grad: Callable[[np.ndarray, np.ndarray, int], np.ndarray]
    grad_lo: np.ndarray
    grad_hi: np.ndarray
    G: float
    project: Callable[[np.ndarray], np.ndarray]
    diam: Optional[float] = None
    H: Optional[float] = None
    point_loss: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    loss_range: Optional[tuple[float, float]] = None
    minimize: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        self.grad_lo = np.broadcast_to(np.asarray(self.grad_lo, dtype=float), (self.d,))
        self.grad_hi = np.broadcast_to(np.asarray(self.grad_hi, dtype=float), (self.d,))
        if np.any(self.grad_hi <= self.grad_lo):
            raise InvalidParameterError("each gradient range needs hi > lo")

    def encode(self, i: int, g):
        return (np.asarray(g, dtype=float) - self.grad_lo[i]) / (self.grad_hi[i] - self.grad_lo[i])

    def decode(self, i: int, v):
        return self.grad_lo[i] + (self.grad_hi[i] - self.grad_lo[i]) * np.asarray(v, dtype=float)

    def coordinate_query(self, x: np.ndarray, i: int, name: Optional[str] = None) -> StatQuery:
        x = np.array(x, dtype=float)
        return StatQuery(lambda pts: self.encode(i, self.point_grad(pts, x, i)), name=name)

    def loss_query(self, x: np.ndarray, name: Optional[str] = None) -> tuple[StatQuery, Callable]:
        """The loss at x as a [0, 1] statistical query, with the map back to loss units."""
        if self.point_loss is None or self.loss_range is None:
            raise InvalidParameterError("this loss has no per-point loss to evaluate candidates with")
        lo, hi = self.loss_range
        x = np.array(x, dtype=float)
        query = StatQuery(lambda pts: (self.point_loss(pts, x) - lo) / (hi - lo), name=name)
        return query, lambda v: lo + (hi - lo) * v

    def loss(self, points: np.ndarray, x: np.ndarray) -> float:
        return float(np.mean(self.point_loss(points, np.asarray(x, dtype=float))))

    def excess_loss(self, points: np.ndarray, x: np.ndarray) -> float:
        """L(S, x) - min over the domain of L(S, .)."""
        return self.loss(points, x) - self.loss(points, self.minimize(points))


def quadratic_loss(d: int = 1, lo: float = 0.0, hi: float = 1.0) -> LossSpec:
    """Mean of ``||x - s||^2 / 2`` over data in ``[lo, hi]^d``, minimized over the same box.

    The per-point gradient ``x - s`` has coordinates in ``[lo - hi, hi - lo]``, so
    ``G = diam = (hi - lo) sqrt(d)``; the loss is 1-strongly convex.
    """
    width = hi - lo

    def point_grad(points, x, i):
        return x[i] - points[:, i]

    def point_loss(points, x):
        return 0.5 * np.sum((points - x) ** 2, axis=1)

    return LossSpec(
        d=d,
        point_grad=point_grad,
        grad_lo=-width,
        grad_hi=width,
        G=width * math.sqrt(d),
        project=lambda x: np.clip(x, lo, hi),
        diam=width * math.sqrt(d),
        H=1.0,
        point_loss=point_loss,
        loss_range=(0.0, 0.5 * d * width**2),
        minimize=lambda points: np.clip(points.mean(axis=0), lo, hi),
    )


def convex_iterations(diam: float, G: float, alpha: float) -> int:
    """Iterations per query for a convex loss: ``ceil(diam^2 G^2 / alpha^2)``."""
    return math.ceil(diam**2 * G**2 / alpha**2 * (1 - 1e-12))


def strongly_convex_iterations(G: float, H: float, alpha: float) -> int:
    """Iterations per query for an H-strongly convex loss, ``ceil(G^2 / (alpha H))`` (log factor dropped)."""
    return math.ceil(G**2 / (alpha * H) * (1 - 1e-12))


def boosting_runs(k: int, beta: float) -> int:
    return max(1, math.ceil(math.log(k / beta)))


@dataclass(frozen=True)
class GdConfig:
    k: int
    T: int
    ell: int
    alpha: float
    beta: float = 0.05
    mode: Mode = "convex"
    x0: Optional[tuple] = None

    def __post_init__(self):
        if self.mode not in ("convex", "strongly-convex"):
            raise InvalidParameterError(f"unknown descent mode {self.mode!r}")
        if self.k < 1 or self.T < 1 or self.ell < 1:
            raise InvalidParameterError("k, T and ell must be positive")
        if not (0 < self.alpha) or not (0 < self.beta < 1):
            raise InvalidParameterError("alpha must be positive and beta in (0, 1)")

    @classmethod
    def for_loss(cls, loss: LossSpec, alpha: float, ell: int, mode: Mode = "convex", k: int = 1, **kw):
        """Configuration with T at the iteration guidance for the loss and mode."""
        if mode == "convex":
            T = convex_iterations(loss.diam, loss.G, alpha)
        else:
            T = strongly_convex_iterations(loss.G, loss.H, alpha)
        return cls(k=k, T=T, ell=ell, alpha=alpha, mode=mode, **kw)

    def start(self, loss: LossSpec) -> np.ndarray:
        x0 = np.zeros(loss.d) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if x0.shape != (loss.d,):
            raise InvalidParameterError(f"x0 must have dimension {loss.d}")
        if not np.allclose(loss.project(x0), x0):
            raise InvalidParameterError("x0 must lie in the domain")
        return x0

    def runs(self) -> int:
        return boosting_runs(self.k, self.beta)

    def oracle_rounds(self, d: int, boosted: bool = False) -> int:
        """Statistical queries spent over all k optimization queries (R = k T d unboosted)."""
        if not boosted:
            return self.k * self.T * d
        r = self.runs()
        return self.k * (r * self.T * d + (r if r > 1 else 0))


def step_size(loss: LossSpec, mode: Mode, t: int) -> float:
    """``diam / (G sqrt t)`` for convex losses, ``2 / (H t)`` for strongly convex ones."""
    if mode == "convex":
        if loss.diam is None:
            raise InvalidParameterError("the convex schedule needs a diameter bound")
        return loss.diam / (loss.G * math.sqrt(t))
    if loss.H is None:
        raise InvalidParameterError("the strongly convex schedule needs a convexity modulus H")
    return 2.0 / (loss.H * t)


def oracle_accuracy_estimate(rounds: int, n: int, ell: int) -> float:
    """``R^(1/4)/sqrt(n) + 1/sqrt(ell)``: the in-expectation oracle accuracy up to constants."""
    return rounds**0.25 / math.sqrt(n) + 1 / math.sqrt(ell)


def gradient_oracle(
    data: Dataset, loss: LossSpec, cfg: GdConfig, oracle_alpha: float, rng: np.random.Generator,
    boosted: bool = False, replacement: bool = True,
) -> SqMechanism:
    """An sq session sized for every gradient (and candidate-evaluation) query of ``cfg``."""
    rounds = cfg.oracle_rounds(loss.d, boosted)
    sq_cfg = config_from_accuracy(
        oracle_alpha, cfg.beta, rounds, data.n, mode="in-expectation", ell=cfg.ell, replacement=replacement
    )
    if cfg.mode == "strongly-convex":
        estimate = oracle_accuracy_estimate(rounds, data.n, cfg.ell)
        if estimate * math.sqrt(loss.d) > 1 / cfg.T:
            warnings.warn(
                f"oracle accuracy estimate {estimate:.3g} times sqrt(d) exceeds 1/T = {1 / cfg.T:.3g}; "
                "the strongly convex step schedule is outside its guarantee",
                SampleSizeWarning,
                stacklevel=2,
            )
    return SqMechanism(data, sq_cfg, rng)


@dataclass
class GdTrace:
    """Per-coordinate log of a descent session, written as CSV."""

    reference: Optional[np.ndarray] = None  # dataset points for excess-loss estimates
    rows: list = field(default_factory=list)

    HEADER = ("query_id", "iteration", "coordinate", "raw_answer", "decoded", "eta", "excess_loss_estimate")

    def to_csv(self, file=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.HEADER)
        for row in self.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        text = buf.getvalue()
        if file is not None:
            with open(file, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def noisy_gradient(loss: LossSpec, x: np.ndarray, sq) -> tuple[np.ndarray, np.ndarray]:
    """Answer the d encoded coordinate queries at x; return (raw answers, decoded gradient)."""
    raw = np.array([sq.answer(loss.coordinate_query(x, i, name=f"grad{i}")) for i in range(loss.d)])
    return raw, np.array([loss.decode(i, raw[i]) for i in range(loss.d)])


def gd_answer(loss: LossSpec, cfg: GdConfig, sq, query_id: int = 0,
              trace: Optional[GdTrace] = None) -> np.ndarray:
    """Run T projected steps ``x_t = project(x_{t-1} - eta_t * grad_t)`` and return the mean iterate.

    If the oracle's budget runs out mid-run, its transcript is flagged invalid
    and the BudgetExhaustedError propagates: a partial average has no guarantee.
    """
    x = cfg.start(loss)
    total = np.zeros(loss.d)
    for t in range(1, cfg.T + 1):
        try:
            raw, grad = noisy_gradient(loss, x, sq)
        except BudgetExhaustedError:
            if hasattr(sq, "transcript"):
                sq.transcript.valid = False
            raise
        eta = step_size(loss, cfg.mode, t)
        x = loss.project(x - eta * grad)
        total += x
        if trace is not None:
            excess = ""
            if trace.reference is not None and loss.minimize is not None:
                excess = loss.excess_loss(trace.reference, x)
            for i in range(loss.d):
                trace.rows.append((query_id, t, i, float(raw[i]), float(grad[i]), eta, excess))
    return total / cfg.T


def gd_answer_boosted(loss: LossSpec, cfg: GdConfig, sq, query_id: int = 0,
                      trace: Optional[GdTrace] = None,
                      evaluator: Optional[Callable[[np.ndarray], float]] = None) -> np.ndarray:
    """Best of ``ceil(log(k/beta))`` independent descents.

    Candidates are scored with one fresh loss query each through ``sq`` (or with
    ``evaluator`` when given); the lowest score wins. With a single run there is
    nothing to choose and no evaluation query is spent.
    """
    candidates = [gd_answer(loss, cfg, sq, query_id, trace) for _ in range(cfg.runs())]
    if len(candidates) == 1:
        return candidates[0]
    if evaluator is None:
        def evaluator(x):
            query, decode = loss.loss_query(x, name="candidate_loss")
            return float(decode(sq.answer(query)))
    scores = [evaluator(x) for x in candidates]
    return candidates[int(np.argmin(scores))]
