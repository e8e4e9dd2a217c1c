import numpy as np
import pytest

from adaquery.errors import InvalidParameterError
from adaquery.queries import CountingQuery, Dataset, StatQuery, Transcript


def test_dataset_validation():
    with pytest.raises(InvalidParameterError):
        Dataset(np.array([], dtype=int))
    with pytest.raises(InvalidParameterError):
        Dataset(np.array([0, 5]), universe_size=5)
    with pytest.raises(InvalidParameterError):
        Dataset(np.array([0.5]), universe_size=5)
    assert Dataset(np.zeros((4, 2))).n == 4


def test_take_keeps_universe():
    data = Dataset(np.arange(10), universe_size=10)
    sub = data.take(np.array([3, 3, 7]))
    assert sub.points.tolist() == [3, 3, 7] and sub.universe_size == 10


def test_query_counts_evaluations_and_checks_range():
    q = StatQuery(lambda pts: pts / 10, name="scaled")
    q(np.arange(5))
    q.mean(np.arange(3))
    assert q.eval_count == 8
    with pytest.raises(InvalidParameterError):
        q(np.array([11]))


def test_counting_query_rejects_fractions():
    with pytest.raises(InvalidParameterError):
        CountingQuery.from_table([0, 0.5, 1])
    q = CountingQuery.from_table([0, 1, 1, 0], name="c")
    assert q.mean(np.array([1, 2, 3])) == pytest.approx(2 / 3)


def test_transcript_csv_layout(tmp_path):
    t = Transcript()
    t.append("q0", 0.25, 381, 1200)
    t.append("q1", 0.5, 381, 900)
    text = t.to_csv(tmp_path / "t.csv")
    assert text == "query_id,answer,samples_examined,elapsed_ns\nq0,0.25,381,1200\nq1,0.5,381,900\n"
    assert (tmp_path / "t.csv").read_bytes() == text.encode()
    assert t.answers == [0.25, 0.5] and len(t) == 2
