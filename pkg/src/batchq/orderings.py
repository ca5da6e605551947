"""
Majorization, sample-path prefix orderings between two traces of the same workload, and the
weak work-efficiency check.

The state of a trace is right-continuous and piecewise constant between event times, so the
prefix orderings are checked exactly by evaluating both state paths at the merged event times.
"""
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from batchq.model import iter_states

_log = logging.getLogger(__name__)

TIME_TOLERANCE = 1e-9


@dataclass(frozen=True)
class OrderingViolation:
    """
    :param float time: Event time at which the inequality breaks
    :param index: Prefix index j, threshold tau, or the offending task
    :param lhs: Left-hand side of the inequality
    :param rhs: Right-hand side
    """
    time: float
    index: object
    lhs: object
    rhs: object


@dataclass(frozen=True)
class OrderingReport:
    ordering: str
    holds: bool
    first_violation: OrderingViolation = None
    checked_times: int = 0
    witness: tuple = field(default=())

    def to_dict(self):
        violation = self.first_violation
        return {'ordering': self.ordering,
                'holds': self.holds,
                'checked_times': self.checked_times,
                'first_violation': None if violation is None else {
                    'time': violation.time,
                    'index': _plain(violation.index),
                    'lhs': _plain(violation.lhs),
                    'rhs': _plain(violation.rhs)},
                'witness': [_plain(w) for w in self.witness]}


def _plain(value):
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _vectors(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError('Majorization compares vectors of equal length, got %s and %s' % (x.shape, y.shape))
    return x, y


def weak_majorize_below(x, y, tol=0.0):
    """
    Whether every partial sum of the largest entries of x is at most that of y.

    >>> weak_majorize_below([1, 1], [1, 3])
    True
    >>> weak_majorize_below([5, 0], [1, 3])
    False
    """
    x, y = _vectors(x, y)
    return bool(np.all(np.cumsum(np.sort(x)[::-1]) <= np.cumsum(np.sort(y)[::-1]) + tol))


def weak_majorize_above(x, y, tol=0.0):
    """
    Whether every partial sum of the smallest entries of x is at least that of y.

    >>> weak_majorize_above([2, 3], [1, 3])
    True
    >>> weak_majorize_above([0, 3], [1, 3])
    False
    """
    x, y = _vectors(x, y)
    return bool(np.all(np.cumsum(np.sort(x)) >= np.cumsum(np.sort(y)) - tol))


def majorize(x, y, tol=0.0):
    """
    Whether x is majorized by y: weakly majorized from below, with equal totals.

    >>> majorize([2, 2], [1, 3])
    True
    >>> majorize([1, 3], [2, 2])
    False
    """
    x, y = _vectors(x, y)
    return weak_majorize_below(x, y, tol) and abs(x.sum() - y.sum()) <= tol


def _require_same_workload(trace_p, trace_pi):
    if trace_p.workload != trace_pi.workload:
        raise ValueError('Orderings compare two traces of the same workload')


def _merged_times(trace_p, trace_pi, times):
    if times is not None:
        return sorted(times)
    return sorted(set(trace_p.event_times) | set(trace_pi.event_times))


def _paired_states(trace_p, trace_pi, times, use_gamma_for_p):
    for (t, xi_p, gamma_p), (_, xi_pi, _) in zip(iter_states(trace_p, times), iter_states(trace_pi, times)):
        yield t, (gamma_p if use_gamma_for_p else xi_p), xi_pi


def check_fewest_prefix(trace_p, trace_pi, use_gamma_for_p=True, times=None):
    """
    Checks that at every event time t and every j, the sum of the n - j + 1 smallest entries of
    gamma_P(t) (or xi_P(t)) is at most that of xi_pi(t).

    :param Trace trace_p: Trace of the work-conserving policy
    :param Trace trace_pi: Trace of the policy it is compared with
    :param bool use_gamma_for_p: Compare gamma_P rather than xi_P
    :param list[float] times: Evaluation times, defaults to the merged event times
    :rtype: OrderingReport
    """
    _require_same_workload(trace_p, trace_pi)
    name = 'fewest-gamma' if use_gamma_for_p else 'fewest-xi'
    times = _merged_times(trace_p, trace_pi, times)
    n = trace_p.workload.n
    for t, lhs, rhs in _paired_states(trace_p, trace_pi, times, use_gamma_for_p):
        # tails of descending order are heads of ascending order
        lhs_sums = np.cumsum(np.sort(lhs))
        rhs_sums = np.cumsum(np.sort(rhs))
        bad = np.flatnonzero(lhs_sums > rhs_sums)
        if bad.size:
            count = int(bad[-1])
            return OrderingReport(name, False, OrderingViolation(t, n - count, int(lhs_sums[count]),
                                                                 int(rhs_sums[count])), len(times))
    return OrderingReport(name, True, None, len(times))


def _threshold_check(name, trace_p, trace_pi, keys, use_gamma_for_p, times):
    _require_same_workload(trace_p, trace_pi)
    times = _merged_times(trace_p, trace_pi, times)
    order = np.argsort(keys, kind='stable')
    sorted_keys = keys[order]
    thresholds = np.unique(sorted_keys)
    ends = np.searchsorted(sorted_keys, thresholds, side='right') - 1
    for t, lhs, rhs in _paired_states(trace_p, trace_pi, times, use_gamma_for_p):
        lhs_sums = np.cumsum(lhs[order])[ends]
        rhs_sums = np.cumsum(rhs[order])[ends]
        bad = np.flatnonzero(lhs_sums > rhs_sums)
        if bad.size:
            first = int(bad[0])
            return OrderingReport(name, False, OrderingViolation(t, float(thresholds[first]), int(lhs_sums[first]),
                                                                 int(rhs_sums[first])), len(times))
    return OrderingReport(name, True, None, len(times))


def check_due_prefix(trace_p, trace_pi, use_gamma_for_p=True, times=None):
    """
    Checks that at every event time t and every due-time threshold tau, the remaining (or
    unassigned) tasks of P among jobs due by tau are at most the remaining tasks of pi among
    those jobs.

    :rtype: OrderingReport
    """
    name = 'due-gamma' if use_gamma_for_p else 'due-xi'
    return _threshold_check(name, trace_p, trace_pi, trace_p.workload.dues, use_gamma_for_p, times)


def check_arrival_prefix(trace_p, trace_pi, use_gamma_for_p=True, times=None):
    """Like check_due_prefix, with thresholds over arrival times."""
    name = 'arrival-gamma' if use_gamma_for_p else 'arrival-xi'
    return _threshold_check(name, trace_p, trace_pi, trace_p.workload.arrivals, use_gamma_for_p, times)


def _unassigned_totals(trace):
    times = np.asarray(trace.event_times, dtype=float)
    totals = np.array([int(gamma.sum()) for _, _, gamma in iter_states(trace)], dtype=int)
    return times, totals


def check_weak_work_efficiency(trace_p, trace_pi, tol=TIME_TOLERANCE):
    """
    Checks that P is weakly more work-efficient than pi on this sample path: every pi-task whose
    service interval [tau, nu] sees unassigned tasks in P's queue throughout is matched to a
    distinct P-task starting within [tau, nu].

    :param Trace trace_p: Trace of the work-conserving policy
    :param Trace trace_pi: Trace of the compared policy
    :param float tol: Slack on interval end points
    :rtype: OrderingReport
    """
    _require_same_workload(trace_p, trace_pi)
    name = 'weak-work-efficiency'
    if not trace_pi.task_records:
        return OrderingReport(name, True, None, 0)
    times, totals = _unassigned_totals(trace_p)
    # number of event times with an empty queue up to each index
    empties = np.concatenate([[0], np.cumsum(totals == 0)])
    active = []
    for record in trace_pi.task_records:
        lo = np.searchsorted(times, record.start, side='right') - 1
        hi = np.searchsorted(times, record.finish, side='right') - 1
        if lo >= 0 and empties[hi + 1] - empties[lo] == 0:
            active.append(record)
    if not active:
        return OrderingReport(name, True, None, len(trace_pi.task_records))

    starts = trace_p.starts
    indptr = [0]
    indices = []
    for record in active:
        first = np.searchsorted(starts, record.start - tol, side='left')
        last = np.searchsorted(starts, record.finish + tol, side='right')
        indices.extend(range(first, last))
        indptr.append(len(indices))
    graph = csr_matrix((np.ones(len(indices), dtype=np.int8), np.asarray(indices, dtype=np.int32),
                        np.asarray(indptr, dtype=np.int32)), shape=(len(active), max(len(starts), 1)))
    matching = maximum_bipartite_matching(graph, perm_type='column')
    unmatched = np.flatnonzero(matching < 0)
    _log.debug('%i of %i pi-tasks active, %i unmatched', len(active), len(trace_pi.task_records), unmatched.size)
    if not unmatched.size:
        return OrderingReport(name, True, None, len(trace_pi.task_records))

    deficient, neighbours = _hall_set(graph, matching, int(unmatched[0]))
    culprit = min((active[r] for r in deficient), key=lambda r: (r.start, r.server, r.job))
    witness = tuple((active[r].server, active[r].job, active[r].task_index) for r in sorted(deficient))
    return OrderingReport(name, False,
                          OrderingViolation(culprit.start, (culprit.server, culprit.job, culprit.task_index),
                                            len(deficient), len(neighbours)),
                          len(trace_pi.task_records), witness)


def _hall_set(graph, matching, root):
    """
    Rows reachable from an unmatched row along alternating paths. Together with their
    neighbourhood they violate Hall's condition: |N(S)| = |S| - 1.
    """
    owner = {}
    for row, column in enumerate(matching):
        if column >= 0:
            owner[int(column)] = row
    rows = {root}
    columns = set()
    queue = deque([root])
    while queue:
        row = queue.popleft()
        for column in graph.indices[graph.indptr[row]:graph.indptr[row + 1]]:
            column = int(column)
            if column in columns:
                continue
            columns.add(column)
            matched = owner.get(column)
            if matched is not None and matched not in rows:
                rows.add(matched)
                queue.append(matched)
    return rows, columns


def empirical_st_dominance(samples_a, samples_b, epsilon=0.0):
    """
    One-sided check of A <= B in the usual stochastic order: the empirical survival of A never
    exceeds that of B by more than epsilon at any pooled sample point.

    >>> empirical_st_dominance([1, 2, 3], [2, 3, 4])
    True
    >>> empirical_st_dominance([2, 3, 4], [1, 2, 3])
    False
    """
    a = np.sort(np.asarray(samples_a, dtype=float))
    b = np.sort(np.asarray(samples_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError('Both samples must be nonempty')
    points = np.union1d(a, b)
    survival_a = 1.0 - np.searchsorted(a, points, side='right') / float(a.size)
    survival_b = 1.0 - np.searchsorted(b, points, side='right') / float(b.size)
    return bool(np.all(survival_a <= survival_b + epsilon))


def robin_hood_pair(rng, size, transfers=3, scale=10.0):
    """
    A random pair x, y with x majorized by y: x is y after a few transfers from a larger to a
    smaller coordinate.

    :rtype: tuple[numpy.ndarray, numpy.ndarray]
    """
    y = rng.uniform(0, scale, size)
    x = y.copy()
    for _ in range(transfers):
        i, j = rng.choice(size, 2, replace=False)
        if x[i] < x[j]:
            i, j = j, i
        amount = rng.random() * (x[i] - x[j])
        x[i] -= amount
        x[j] += amount
    return x, y


def schur_check_counterexample_search(metric, trials, rng, size=4):
    """
    Searches for a pair x majorized by y with metric(x) > metric(y).

    :param function metric: Function of one vector
    :param int trials: Number of random pairs
    :param numpy.random.Generator rng: Source of randomness
    :param int size: Vector length, at least 2
    :return: A counterexample (x, y), or None
    """
    for _ in range(trials):
        x, y = robin_hood_pair(rng, size)
        if metric(x) > metric(y) + 1e-9:
            return x, y
    return None
