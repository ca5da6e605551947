"""
Coupled sample paths of a work-conserving policy P and an arbitrary policy pi on the same
workload and servers.

pi runs first on the service substreams. P runs second: when P starts a task at time s on server
l, the first pi-task started on l at some tau >= s that no earlier P-task has used yet is looked
up. A fresh draw X0 decides whether P's task would still be in service at tau. If it would, P's
task completes at tau + R, where R is the residual service after chi = tau - s, drawn with the
same uniform as the pi-task. Otherwise it completes at s + X0. On NBU servers R never exceeds the
pi-task's duration, so P's server l starts a new task before the pi-task ends.
"""
import csv
import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from batchq import HypothesisError
from batchq.engine import (EDD, FCFS, FRESH_STREAM, FUT, LIFO, EngineConfig, SubstreamSampler, simulate,
                           substream)
from batchq.metrics import SCH1, SCH2, SYM, d_avg, extract_vectors, get_metric
from batchq.orderings import empirical_st_dominance

_log = logging.getLogger(__name__)

NEAR_OPTIMALITY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class AuditEntry:
    """
    One pi-task and what P did with its uniform.

    :param int server: Server id
    :param tuple pi_task: (job, task_index) of the pi-task
    :param float uniform: Uniform that drew the pi-task's service time
    :param float pi_duration: The pi-task's service time
    :param bool consumed: Whether a P-task completed on this uniform's residual
    :param float chi: Service the P-task had received at the pi-task's start
    :param float residual: Residual service committed for the P-task
    """
    server: int
    pi_task: tuple
    uniform: float
    pi_duration: float
    consumed: bool = False
    chi: float = None
    residual: float = None


@dataclass(frozen=True)
class CoupledPair:
    trace_p: object
    trace_pi: object
    shared_seed: int
    audit: tuple = field(default=())

    @property
    def consumed(self):
        return [entry for entry in self.audit if entry.consumed]


class CoupledSampler(object):
    """
    P-side sampler: commits each P completion against the pi-task draws of the same server.
    """

    def __init__(self, bank, seed, pi_draws):
        self.bank = bank
        self._fresh = {server.id: substream(seed, FRESH_STREAM, server.id) for server in bank.servers}
        self._pi_draws = pi_draws
        self._next = {server.id: 0 for server in bank.servers}
        self.commitments = {}

    def complete(self, server_id, job_id, start):
        dist = self.bank.distribution(server_id)
        fresh = dist.quantile(float(self._fresh[server_id].random()))
        draws = self._pi_draws[server_id]
        position = self._next[server_id]
        while position < len(draws) and draws[position].start < start:
            position += 1
        self._next[server_id] = position
        if position == len(draws):
            return start + fresh
        target = draws[position]
        chi = target.start - start
        if fresh <= chi:
            return start + fresh
        residual = dist.residual_quantile(chi, target.uniform)
        self._next[server_id] = position + 1
        self.commitments[(server_id, position)] = (chi, residual)
        _log.debug('Server %i: P-task of job %i started at %r completes on the residual of pi-task %s',
                   server_id, job_id, start, (target.job, target.task_index))
        # exactly tau + R
        return target.start + residual


def check_coupling_hypotheses(servers, config_p):
    for server, cls in zip(servers.servers, servers.classes):
        if not cls.is_nbu:
            raise HypothesisError('Coupling needs NBU service times, server %i is %s'
                                  % (server.id, cls.value))
    if config_p.idle_injection:
        raise HypothesisError('The coupled policy P must be work-conserving, drop its idle injection')


def coupled_simulate(workload, servers, policy_p, policy_pi, seed, config_p=None, config_pi=None):
    """
    Builds a coupled pair of traces of P and pi.

    :param Workload workload: Job parameters
    :param ServerBank servers: NBU server bank
    :param Policy policy_p: Work-conserving policy
    :param Policy policy_pi: Compared policy
    :param int seed: Shared seed
    :param EngineConfig config_p: Engine options of P, seed ignored
    :param EngineConfig config_pi: Engine options of pi, seed ignored
    :rtype: CoupledPair
    :raises HypothesisError: on a non-NBU server or an idle-injected P
    """
    config_p = EngineConfig(seed=seed) if config_p is None else _with_seed(config_p, seed)
    config_pi = EngineConfig(seed=seed) if config_pi is None else _with_seed(config_pi, seed)
    check_coupling_hypotheses(servers, config_p)
    pi_sampler = SubstreamSampler(servers, seed)
    trace_pi = simulate(workload, servers, policy_pi, config_pi, pi_sampler)
    p_sampler = CoupledSampler(servers, seed, pi_sampler.draws)
    trace_p = simulate(workload, servers, policy_p, config_p, p_sampler)
    audit = []
    for server_id, draws in sorted(pi_sampler.draws.items()):
        for position, draw in enumerate(draws):
            chi, residual = p_sampler.commitments.get((server_id, position), (None, None))
            audit.append(AuditEntry(server_id, (draw.job, draw.task_index), draw.uniform, draw.duration,
                                    chi is not None, chi, residual))
    _log.debug('Coupled %s with %s on seed %i: %i of %i pi-uniforms consumed', policy_p.tag, policy_pi.tag, seed,
               len(p_sampler.commitments), len(audit))
    return CoupledPair(trace_p, trace_pi, seed, tuple(audit))


def _with_seed(config, seed):
    return EngineConfig(config.server_select, config.tiebreak, seed, config.idle_injection)


class Claim(enum.Enum):
    FUT_AVG = 'fut_avg'
    EDD_LMAX = 'edd_lmax'
    FCFS_DMAX = 'fcfs_dmax'
    SYM = 'sym'
    SCH1 = 'sch1'
    SCH2 = 'sch2'


# Claim: (policy P must be, metric it is stated for, or the metric classes it covers)
_CLAIMS = {
    Claim.FUT_AVG: (FUT(), 'd_avg', None),
    Claim.SYM: (FUT(), None, frozenset([SYM])),
    Claim.EDD_LMAX: (EDD(), 'l_max', None),
    Claim.SCH1: (EDD(), None, frozenset([SYM, SCH1])),
    Claim.FCFS_DMAX: (FCFS(), 'd_max', None),
    Claim.SCH2: (FCFS(), None, frozenset([SYM, SCH2])),
}


def sch1_hypotheses_hold(workload):
    """
    Whether EDD's near-optimality extends to every Sch-1 metric: all jobs have one task, or due
    times and sizes are both nondecreasing in arrival order.
    """
    if workload.n == 0 or np.all(workload.sizes == 1):
        return True
    return bool(np.all(np.diff(workload.dues) >= 0) and np.all(np.diff(workload.sizes) >= 0))


def sch2_hypotheses_hold(workload):
    """
    Whether FCFS's near-optimality extends from D_max to every symmetric or Sch-2 metric: job
    sizes are nondecreasing in arrival order, equal sizes included.
    """
    return bool(np.all(np.diff(workload.sizes) >= 0))


def verify_near_optimality(pair, metric, which):
    """
    Checks metric(V(P)) <= metric(C(pi)) on one coupled sample path.

    :param CoupledPair pair: Coupled traces
    :param str|Metric metric: Metric to compare
    :param Claim|str which: The near-optimality claim being checked
    :rtype: bool
    :raises HypothesisError: when the metric, the policy P or the workload does not fit the claim
    """
    which = Claim(which)
    metric = get_metric(metric)
    policy, name, classes = _CLAIMS[which]
    if pair.trace_p.policy != policy.tag:
        raise HypothesisError('%s is stated for P = %s, the pair has P = %s' % (which.value, policy.tag,
                                                                              pair.trace_p.policy))
    if name is not None and metric.name != name:
        raise HypothesisError('%s is stated for %s, not %s' % (which.value, name, metric.name))
    if classes is not None and not classes & metric.classes:
        raise HypothesisError('%s is not in the %s classes' % (metric.name, '/'.join(sorted(classes))))
    if which is Claim.SCH1 and not sch1_hypotheses_hold(pair.trace_p.workload):
        raise HypothesisError('Sch-1 near-optimality needs unit jobs, or due times and sizes nondecreasing')
    if which is Claim.SCH2 and not sch2_hypotheses_hold(pair.trace_p.workload):
        raise HypothesisError('Sch-2 near-optimality of FCFS needs job sizes nondecreasing in arrival order')
    lower = metric.evaluate(extract_vectors(pair.trace_p), 'V')
    upper = metric.evaluate(extract_vectors(pair.trace_pi), 'C')
    holds = lower <= upper + NEAR_OPTIMALITY_TOLERANCE
    if not holds:
        _log.warning('%s fails on seed %i: %r > %r', which.value, pair.shared_seed, lower, upper)
    return holds


@dataclass(frozen=True)
class FidelityReport:
    seeds: int
    mean_coupled: float
    mean_independent: float
    pooled_se: float
    coupled_below: bool
    independent_below: bool
    passed: bool

    @property
    def mean_difference(self):
        return self.mean_coupled - self.mean_independent


def marginal_fidelity_test(workload, servers, policy, n_seeds, partner=None, base_seed=0, se_multiple=3.0,
                           slack=None):
    """
    Compares the average delay of P on the coupled side against independent runs of P. Passes when
    the means agree within ``se_multiple`` pooled standard errors and the empirical distributions
    dominate each other both ways within ``slack``.

    :param Workload workload: Job parameters
    :param ServerBank servers: NBU server bank
    :param Policy policy: Policy P
    :param int n_seeds: Number of runs per side, at least 100
    :param Policy partner: pi of the coupled runs, LIFO by default
    :param int base_seed: First coupled seed, independent runs use the next n_seeds seeds
    :param float se_multiple: Allowed mean difference in pooled standard errors
    :param float slack: Dominance slack, 2 / sqrt(n_seeds) by default
    :rtype: FidelityReport
    """
    if n_seeds < 100:
        raise ValueError('A fidelity test needs at least 100 seeds, got %i' % n_seeds)
    partner = LIFO() if partner is None else partner
    slack = 2.0 / np.sqrt(n_seeds) if slack is None else slack
    coupled = np.empty(n_seeds)
    independent = np.empty(n_seeds)
    for i in range(n_seeds):
        pair = coupled_simulate(workload, servers, policy, partner, base_seed + i)
        coupled[i] = d_avg(extract_vectors(pair.trace_p).C, workload.arrivals)
        trace = simulate(workload, servers, policy, EngineConfig(seed=base_seed + n_seeds + i))
        independent[i] = d_avg(extract_vectors(trace).C, workload.arrivals)
    se = float(np.sqrt(coupled.var(ddof=1) / n_seeds + independent.var(ddof=1) / n_seeds))
    coupled_below = empirical_st_dominance(coupled, independent, slack)
    independent_below = empirical_st_dominance(independent, coupled, slack)
    close = abs(coupled.mean() - independent.mean()) <= se_multiple * se + NEAR_OPTIMALITY_TOLERANCE
    report = FidelityReport(n_seeds, float(coupled.mean()), float(independent.mean()), se, coupled_below,
                            independent_below, bool(close and coupled_below and independent_below))
    _log.info('Fidelity of %s over %i seeds: coupled %.4f, independent %.4f, se %.4f, passed=%s', policy.tag,
              n_seeds, report.mean_coupled, report.mean_independent, se, report.passed)
    return report


AUDIT_COLUMNS = ['server', 'pi_task', 'uniform', 'chi', 'residual', 'pi_duration']


def write_audit_csv(pair, path):
    """
    Writes the audit of the consumed pi-uniforms, one row per commitment.

    :param CoupledPair pair: Coupled traces
    :param str path: Output file
    """
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(AUDIT_COLUMNS)
        for entry in pair.consumed:
            writer.writerow([entry.server, '%i.%i' % entry.pi_task, repr(float(entry.uniform)), repr(float(entry.chi)),
                             repr(float(entry.residual)), repr(float(entry.pi_duration))])
    _log.info('Wrote %i coupling commitments to %s', len(pair.consumed), path)
