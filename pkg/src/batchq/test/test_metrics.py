import math

import numpy as np
import pytest

from batchq.engine import FUT, simulate
from batchq.metrics import (METRICS, SCH1, SCH2, SYM, Metric, d_avg, d_max, empirical_ccdf, extract_vectors, get_metric,
                            is_subadditive_increasing, is_symmetric_metric, l_max, makespan, metric_classes,
                            p2_norm, p_norm_delay, rms_tardiness, summarize)
from batchq.model import TaskRecord, Trace, Workload
from batchq.orderings import robin_hood_pair
from batchq.test import hand_workload, unit_servers


def test_extract_vectors_hand_fut():
    vectors = extract_vectors(simulate(hand_workload(), unit_servers(), FUT()))
    assert vectors.C.tolist() == [3, 1]
    assert vectors.V.tolist() == [2, 0]
    assert vectors.D.tolist() == [3, 1]
    assert vectors.L.tolist() == [-7, -9]
    assert vectors.T.tolist() == [0, 0]


def test_extract_vectors_single_job():
    trace = Trace(Workload.from_arrays([0], [1], [0]), 1, 'fut', (TaskRecord(1, 1, 1, 0, 1),))
    vectors = extract_vectors(trace)
    assert (vectors.C.tolist(), vectors.V.tolist()) == ([1], [0])
    assert (vectors.D.tolist(), vectors.L.tolist(), vectors.T.tolist()) == ([1], [1], [1])
    trace = Trace(Workload.from_arrays([0], [1], [0]), 1, 'fut', (TaskRecord(1, 1, 1, 2, 2),))
    vectors = extract_vectors(trace)
    assert vectors.C.tolist() == vectors.V.tolist() == [2]
    with pytest.raises(ValueError):
        vectors.times('D')


def test_d_avg():
    assert d_avg([3, 1], [0, 0]) == 2
    assert d_avg([0, 1], [0, 1]) == 0
    assert d_avg([2, 3], [0, 1]) == 2
    with pytest.raises(ValueError):
        d_avg([], [])
    with pytest.raises(ValueError):
        d_avg([1, 2], [0])


def test_l_max():
    assert l_max([3, 1], [2, 2]) == 1
    assert l_max([2, 2], [2, 2]) == 0
    assert l_max([3, 1], [0, 5]) == 3


def test_d_max():
    assert d_max([3, 1], [0, 0]) == 3
    assert d_max([0, 4], [0, 4]) == 0
    assert d_max([5, 6], [0, 4]) == 5


def test_p_norm():
    assert p_norm_delay([3, 4], 2) == pytest.approx(5)
    assert p_norm_delay([7.5], 3) == pytest.approx(7.5)
    assert p_norm_delay([1, 1, 1], 1) == pytest.approx(3)
    assert p2_norm([3, 5], [0, 1]) == pytest.approx(5)
    with pytest.raises(ValueError):
        p_norm_delay([1], 0.5)


def test_rms_tardiness():
    assert rms_tardiness([1, 5], [1, 5]) == 0
    assert rms_tardiness([3, 1], [2, 2]) == pytest.approx(math.sqrt(0.5))
    assert rms_tardiness([4, 0], [1, 5]) == pytest.approx(math.sqrt(4.5))


def test_makespan():
    assert makespan([3, 1]) == 3


def test_classification():
    assert is_symmetric_metric('d_avg')
    assert SCH1 in get_metric('l_max').classes
    assert SCH2 in get_metric('p2_norm').classes
    assert not is_symmetric_metric('l_max')
    table = metric_classes()
    assert table['d_avg'] == sorted([SCH1, SCH2, SYM])
    assert set(table) == set(METRICS)
    with pytest.raises(ValueError, match='Unknown metric'):
        get_metric('d_min')


def test_subadditive_increasing():
    rng = np.random.default_rng(3)
    a = np.zeros(5)
    for name in ('d_avg', 'd_max', 'p2_norm'):
        assert is_subadditive_increasing(name, a, 500, rng) is None
    # squared delays are not sub-additive
    squared = Metric('sq', lambda vec, ref: float(np.sum((vec - ref) ** 2)), 'a', frozenset([SCH2]))
    assert is_subadditive_increasing(squared, a, 50, rng) is not None


def test_empirical_ccdf():
    grid, survival = empirical_ccdf([1, 2, 3, 4], 4)
    assert grid.tolist() == [1, 2, 3, 4]
    assert survival.tolist() == [0.75, 0.5, 0.25, 0]
    with pytest.raises(ValueError):
        empirical_ccdf([], 3)


def test_summarize():
    row = summarize(simulate(hand_workload(), unit_servers(), FUT()), ['d_avg', 'd_max', 'makespan', 'p2_norm'])
    assert row == {'d_avg_c': 2, 'd_avg_v': 1, 'd_max_c': 3, 'd_max_v': 2, 'makespan_c': 3,
                   'p2_norm': pytest.approx(math.sqrt(10))}


def _random_run(rng, n):
    a = np.sort(rng.uniform(0, 20, n))
    d = a + rng.choice([0.0, 5.0, 50.0], n)
    return a + rng.uniform(0, 30, n), a, d


@pytest.mark.parametrize('name', sorted(METRICS))
def test_invariant_under_relabelling_jobs(name):
    metric = get_metric(name)
    rng = np.random.default_rng(11)
    for _ in range(200):
        vec, a, d = _random_run(rng, int(rng.integers(1, 9)))
        reference = a if metric.reference == 'a' else d
        order = rng.permutation(vec.size)
        assert metric(vec[order], reference[order]) == pytest.approx(metric(vec, reference))


@pytest.mark.parametrize('name', ['d_avg', 'makespan'])
def test_symmetric_metrics_ignore_order(name):
    metric = get_metric(name)
    rng = np.random.default_rng(12)
    for _ in range(200):
        vec, a, _ = _random_run(rng, int(rng.integers(1, 9)))
        same = np.full(vec.size, a[0])
        assert metric(rng.permutation(vec), same) == pytest.approx(metric(vec, same))


@pytest.mark.parametrize('name', sorted(METRICS))
def test_increasing_a_completion_never_lowers_a_metric(name):
    metric = get_metric(name)
    rng = np.random.default_rng(13)
    for _ in range(500):
        vec, a, d = _random_run(rng, int(rng.integers(1, 9)))
        reference = a if metric.reference == 'a' else d
        later = vec.copy()
        later[rng.integers(vec.size)] += rng.exponential(5.0)
        assert metric(later, reference) >= metric(vec, reference) - 1e-12


def test_lateness_is_delay_when_due_at_arrival():
    rng = np.random.default_rng(14)
    for _ in range(200):
        vec, a, _ = _random_run(rng, int(rng.integers(1, 9)))
        assert l_max(vec, a) == d_max(vec, a)


@pytest.mark.parametrize('p', [1, 2, 4])
def test_p_norms_are_schur_convex(p):
    rng = np.random.default_rng(p)
    for _ in range(1000):
        x, y = robin_hood_pair(rng, int(rng.integers(2, 8)))
        assert p_norm_delay(x, p) <= p_norm_delay(y, p) + 1e-9


def test_max_delay_is_schur_convex():
    rng = np.random.default_rng(15)
    for _ in range(1000):
        x, y = robin_hood_pair(rng, int(rng.integers(2, 8)))
        zeros = np.zeros(x.size)
        assert d_max(x, zeros) <= d_max(y, zeros) + 1e-9
