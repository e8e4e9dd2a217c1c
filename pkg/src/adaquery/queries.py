"""Datasets, queries and session transcripts shared by all mechanisms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import count
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class Dataset:
    """An indexed sample S of n points.

    For finite universes the points are integer ids in ``[0, universe_size)``.
    Points may also be rows of a 2-d array (e.g. grid points for losses); in
    that case ``universe_size`` is left as None.
    """

    points: np.ndarray
    universe_size: Optional[int] = None

    def __post_init__(self):
        points = np.asarray(self.points)
        if points.ndim == 0 or len(points) < 1:
            raise InvalidParameterError("a dataset needs at least one point")
        if self.universe_size is not None:
            if not np.issubdtype(points.dtype, np.integer):
                raise InvalidParameterError("finite-universe points must be integer ids")
            if points.min() < 0 or points.max() >= self.universe_size:
                raise InvalidParameterError(f"point ids must lie in [0, {self.universe_size})")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return len(self.points)

    def take(self, index: np.ndarray) -> "Dataset":
        # Subsets of a validated dataset skip re-validation.
        sub = object.__new__(Dataset)
        object.__setattr__(sub, "points", self.points[index])
        object.__setattr__(sub, "universe_size", self.universe_size)
        return sub


_query_ids = count()


class StatQuery:
    """A statistic q: X -> [0, 1] evaluated pointwise, with an evaluation counter.

    ``fn`` maps an array of points to an array of values. ``eval_count`` grows by
    the number of points each call evaluates.
    """

    lo, hi = 0.0, 1.0

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], name: Optional[str] = None):
        self.fn = fn
        self.name = name if name is not None else f"q{next(_query_ids)}"
        self.eval_count = 0

    @classmethod
    def from_table(cls, values, name: Optional[str] = None):
        """Query over a finite universe given by its value at every element id."""
        table = np.asarray(values, dtype=float)
        query = cls(table.__getitem__, name)
        query.table = table
        query._check(table)
        return query

    def _check(self, values: np.ndarray) -> None:
        if values.size and (values.min() < self.lo or values.max() > self.hi):
            raise InvalidParameterError(f"query {self.name} returned values outside [{self.lo}, {self.hi}]")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        values = np.asarray(self.fn(points), dtype=float)
        self.eval_count += len(points)
        self._check(values)
        return values

    def mean(self, points: np.ndarray) -> float:
        return float(np.mean(self(points)))

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, eval_count={self.eval_count})"


class CountingQuery(StatQuery):
    """A statistical query whose values are exactly 0 or 1."""

    def _check(self, values: np.ndarray) -> None:
        if values.size and not np.all((values == 0) | (values == 1)):
            raise InvalidParameterError(f"counting query {self.name} returned a value other than 0 or 1")


@dataclass
class TranscriptRecord:
    query_id: str
    answer: float
    samples_examined: int
    elapsed_ns: int


@dataclass
class Transcript:
    """Ordered record of one adaptive session."""

    records: list[TranscriptRecord] = field(default_factory=list)
    valid: bool = True

    def append(self, query_id: str, answer: float, samples_examined: int, elapsed_ns: int) -> None:
        self.records.append(TranscriptRecord(query_id, answer, samples_examined, elapsed_ns))

    def __len__(self):
        return len(self.records)

    @property
    def answers(self) -> list[float]:
        return [r.answer for r in self.records]

    def to_csv(self, file=None) -> str:
        """Write ``query_id,answer,samples_examined,elapsed_ns`` rows; returns the text."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["query_id", "answer", "samples_examined", "elapsed_ns"])
        for r in self.records:
            writer.writerow([r.query_id, repr(float(r.answer)), r.samples_examined, r.elapsed_ns])
        text = buf.getvalue()
        if file is not None:
            with open(file, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text
