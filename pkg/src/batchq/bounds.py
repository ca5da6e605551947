"""
Closed-form bounds: the sub-optimality gap of FUT in mean average delay, and the factor-2
guarantee of FCFS.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GapBound:
    """
    :param tuple[float] per_job: Gap term of every job
    :param float average: Mean of the per-job terms
    :param float coarse: (ln(min(k_max, m)) + 1) / mu_min, an upper bound on ``average``
    :param tuple[float] rates: Service rates, ascending
    :param tuple[str] warnings: Hypotheses that do not hold for the bank
    """
    per_job: tuple
    average: float
    coarse: float
    rates: tuple
    warnings: tuple = field(default=())


def fut_gap_bound(workload, mus, classes=None):
    """
    Evaluates the FUT gap bound: the mean over jobs of sum_{l <= min(k_i, m)} 1 / (mu_1 + ... + mu_l)
    with the rates in ascending order, and its coarse form.

    :param Workload workload: Nonempty workload
    :param list[float] mus: Positive service rates, in any order
    :param list[DistributionClass] classes: Classes of the servers, to flag non-NBU banks
    :rtype: GapBound
    """
    rates = np.sort(np.asarray(list(mus), dtype=float))
    if workload.n == 0:
        raise ValueError('The gap bound needs a nonempty workload')
    if rates.size == 0 or not np.all(rates > 0):
        raise ValueError('The gap bound needs positive rates, got %s' % rates.tolist())
    # zero-duration servers have rate inf and contribute 1 / inf = 0
    m = rates.size
    # prefix[c] = sum over the c slowest servers of 1 / (cumulative rate)
    prefix = np.concatenate([[0.0], np.cumsum(1.0 / np.cumsum(rates))])
    per_job = prefix[np.minimum(workload.sizes, m)]
    coarse = harmonic_log_bound(min(workload.k_max, m)) / rates[0]
    warnings = ()
    if classes is not None and not all(c.is_nbu for c in classes):
        warnings = ('non-nbu-servers',)
        _log.warning('The FUT gap bound assumes NBU service times; the bank has %s',
                     ', '.join(c.value for c in classes))
    return GapBound(tuple(per_job.tolist()), float(per_job.mean()), float(coarse), tuple(rates.tolist()), warnings)


def two_approx_margin(mean_fcfs, mean_other):
    """
    2 * mean_other - mean_fcfs; a nonnegative margin is consistent with FCFS being within twice
    the other policy's value.

    >>> two_approx_margin(3, 2)
    1
    """
    if mean_fcfs < 0 or mean_other < 0:
        raise ValueError('Means of delay metrics are nonnegative, got %r and %r' % (mean_fcfs, mean_other))
    return 2 * mean_other - mean_fcfs


def harmonic_number(k):
    if k < 1 or int(k) != k:
        raise ValueError('k must be a positive integer, got %r' % k)
    return math.fsum(1.0 / l for l in range(1, int(k) + 1))


def harmonic_log_bound(k):
    """
    ln(k) + 1, an upper bound on the k-th harmonic number.

    >>> harmonic_log_bound(1)
    1.0
    """
    if k < 1 or int(k) != k:
        raise ValueError('k must be a positive integer, got %r' % k)
    return math.log(k) + 1.0


@dataclass(frozen=True)
class FactorTwoReport:
    mean_fcfs: float
    se_fcfs: float
    mean_other: float
    se_other: float
    margin: float

    @property
    def holds(self):
        return self.margin >= 0


def _mean_se(samples):
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError('Need at least one sample')
    se = samples.std(ddof=1) / math.sqrt(samples.size) if samples.size > 1 else 0.0
    return float(samples.mean()), float(se)


def factor_two_report(samples_fcfs, samples_other):
    """
    Compares per-run metric values of FCFS and another policy against the factor-2 guarantee. The
    margin is 2 * mean_other - mean_fcfs less two standard errors of that difference.

    :param list[float] samples_fcfs: Metric values of independent FCFS runs
    :param list[float] samples_other: Metric values of independent runs of the other policy
    :rtype: FactorTwoReport
    """
    mean_fcfs, se_fcfs = _mean_se(samples_fcfs)
    mean_other, se_other = _mean_se(samples_other)
    se = math.sqrt(se_fcfs ** 2 + 4 * se_other ** 2)
    margin = two_approx_margin(mean_fcfs, mean_other) - 2 * se
    return FactorTwoReport(mean_fcfs, se_fcfs, mean_other, se_other, margin)
