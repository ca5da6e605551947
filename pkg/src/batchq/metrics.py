"""
Per-job completion vectors and the delay metrics evaluated on them.

Every metric takes a vector of per-job times (C or V) and the reference times it is measured
against (arrivals or dues). The metric classes follow the usual delay-metric taxonomy:

- ``sym``: symmetric and increasing in the delay vector C - a
- ``sch1``: Schur-convex and increasing in the lateness vector C - d
- ``sch2``: Schur-convex and increasing in the delay vector C - a
"""
import logging
from dataclasses import dataclass

import numpy as np

from batchq.model import departure_times

_log = logging.getLogger(__name__)

SYM = 'sym'
SCH1 = 'sch1'
SCH2 = 'sch2'


@dataclass(frozen=True)
class DelayVectors:
    """
    :param numpy.ndarray C: Completion times
    :param numpy.ndarray V: Times at which every task of a job has started
    :param numpy.ndarray a: Arrival times
    :param numpy.ndarray d: Due times
    """
    C: np.ndarray
    V: np.ndarray
    a: np.ndarray
    d: np.ndarray

    @property
    def D(self):
        return self.C - self.a

    @property
    def L(self):
        return self.C - self.d

    @property
    def T(self):
        return np.maximum(self.L, 0.0)

    def times(self, which):
        """
        :param str which: 'C' or 'V'
        """
        if which not in ('C', 'V'):
            raise ValueError("Expected 'C' or 'V', got %r" % which)
        return getattr(self, which)


def extract_vectors(trace):
    """
    Computes C (last finish) and V (last start) of every job.

    :param Trace trace: A valid, complete trace
    :rtype: DelayVectors
    """
    workload = trace.workload
    completion = departure_times(trace)
    saturation = {}
    for record in trace.task_records:
        saturation[record.job] = max(saturation.get(record.job, record.start), record.start)
    ids = [job.id for job in workload.jobs]
    return DelayVectors(C=np.array([completion[i] for i in ids], dtype=float),
                        V=np.array([saturation[i] for i in ids], dtype=float),
                        a=workload.arrivals.copy(),
                        d=workload.dues.copy())


def _pair(vec, reference):
    vec = np.asarray(vec, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if vec.shape != reference.shape:
        raise ValueError('Lengths differ: %i times, %i reference times' % (vec.size, reference.size))
    if vec.size == 0:
        raise ValueError('Metrics need at least one job')
    return vec, reference


def d_avg(vec, a):
    """
    Average delay.

    >>> d_avg([3, 1], [0, 0])
    2.0
    """
    vec, a = _pair(vec, a)
    return float(np.mean(vec - a))


def l_max(vec, d):
    """Maximum lateness."""
    vec, d = _pair(vec, d)
    return float(np.max(vec - d))


def d_max(vec, a):
    """Maximum delay."""
    vec, a = _pair(vec, a)
    return float(np.max(vec - a))


def p_norm_delay(delays, p):
    """
    The p-norm of a delay vector.

    >>> p_norm_delay([3, 4], 2)
    5.0

    :param list[float] delays: Nonnegative delays
    :param float p: Norm order, p >= 1
    """
    if p < 1:
        raise ValueError('p must be at least 1, got %r' % p)
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise ValueError('Metrics need at least one job')
    return float(np.sum(delays ** p) ** (1.0 / p))


def p2_norm(vec, a):
    vec, a = _pair(vec, a)
    return p_norm_delay(vec - a, 2)


def rms_tardiness(vec, d):
    """Root mean square of the tardiness max(vec - d, 0)."""
    vec, d = _pair(vec, d)
    return float(np.sqrt(np.mean(np.maximum(vec - d, 0.0) ** 2)))


def makespan(vec, reference=None):
    vec = np.asarray(vec, dtype=float)
    if vec.size == 0:
        raise ValueError('Metrics need at least one job')
    return float(np.max(vec))


@dataclass(frozen=True)
class Metric:
    """
    A named delay metric.

    :param str name: Registry key, also the CSV column stem
    :param function function: f(vec, reference) -> float
    :param str reference: 'a' or 'd', the workload times the metric is measured against
    :param frozenset[str] classes: Metric classes it belongs to
    """
    name: str
    function: object
    reference: str
    classes: frozenset

    def __call__(self, vec, reference):
        return self.function(vec, reference)

    def evaluate(self, vectors, which='C'):
        """
        :param DelayVectors vectors: Vectors of one run
        :param str which: 'C' or 'V'
        """
        return self.function(vectors.times(which), getattr(vectors, self.reference))


METRICS = {m.name: m for m in [
    Metric('d_avg', d_avg, 'a', frozenset([SYM, SCH1, SCH2])),
    Metric('l_max', l_max, 'd', frozenset([SCH1])),
    Metric('d_max', d_max, 'a', frozenset([SCH2])),
    Metric('p2_norm', p2_norm, 'a', frozenset([SCH2])),
    Metric('rms_tardiness', rms_tardiness, 'd', frozenset([SCH1])),
    Metric('makespan', makespan, 'a', frozenset([SYM])),
]}


def get_metric(metric):
    """
    :param str|Metric metric: Metric or its registry name
    :rtype: Metric
    """
    if isinstance(metric, Metric):
        return metric
    try:
        return METRICS[metric]
    except KeyError:
        raise ValueError('Unknown metric %r, expected one of %s' % (metric, ', '.join(sorted(METRICS))))


def metric_classes():
    """The classification table: metric name to the sorted list of its classes."""
    return {name: sorted(m.classes) for name, m in METRICS.items()}


def is_symmetric_metric(metric):
    return SYM in get_metric(metric).classes


def empirical_ccdf(samples, points=50):
    """
    Empirical survival function Pr[X > t] on an even grid spanning the sample range.

    :param list[float] samples: Nonempty sample
    :param int points: Number of grid points
    :return: Grid and survival values
    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError('Cannot estimate a CCDF from an empty sample')
    grid = np.linspace(samples[0], samples[-1], points)
    survival = 1.0 - np.searchsorted(samples, grid, side='right') / float(samples.size)
    return grid, survival


def is_subadditive_increasing(metric, a, trials, rng, scale=10.0):
    """
    Spot-checks that x -> metric(a + x, a) is sub-additive and increasing on random nonnegative
    vectors x, y: g(x + y) <= g(x) + g(y) and g(x) <= g(x + y).

    :param Metric metric: Metric to check
    :param list[float] a: Reference times
    :param int trials: Number of random (x, y) pairs
    :param numpy.random.Generator rng: Source of randomness
    :return: A violating (x, y) pair, or None
    """
    metric = get_metric(metric)
    a = np.asarray(a, dtype=float)

    def g(x):
        return metric(a + x, a)

    for _ in range(trials):
        x = rng.uniform(0, scale, a.size)
        y = rng.uniform(0, scale, a.size)
        joint = g(x + y)
        if joint > g(x) + g(y) + 1e-9 or g(x) > joint + 1e-9:
            _log.debug('Metric %s fails sub-additivity at x=%s, y=%s', metric.name, x, y)
            return x, y
    return None


SUMMARY_COLUMNS = {
    'd_avg': (('d_avg_c', 'C'), ('d_avg_v', 'V')),
    'l_max': (('l_max_c', 'C'), ('l_max_v', 'V')),
    'd_max': (('d_max_c', 'C'), ('d_max_v', 'V')),
    'p2_norm': (('p2_norm', 'C'),),
    'rms_tardiness': (('rms_tardiness', 'C'),),
    'makespan': (('makespan_c', 'C'),),
}


def summarize(trace, metrics):
    """
    Evaluates metrics on a trace, keyed by summary column.

    :param Trace trace: A complete trace
    :param list[str] metrics: Registry names
    :rtype: dict[str, float]
    """
    vectors = extract_vectors(trace)
    row = {}
    for name in metrics:
        metric = get_metric(name)
        for column, which in SUMMARY_COLUMNS[metric.name]:
            row[column] = metric.evaluate(vectors, which)
    return row
