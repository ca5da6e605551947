import logging
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from batchq import require
from batchq.model import iter_states

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Violation:
    """
    One broken trace invariant.

    :param str invariant: Short name, e.g. 'server-overlap'
    :param float time: Time at which the invariant breaks
    :param tuple entities: Jobs, servers or records involved
    """
    invariant: str
    time: float
    entities: tuple
    detail: str = ''


def validate_trace(trace):
    """
    Checks every trace invariant and returns the violations found. An empty list means the trace
    is well formed.

    :param Trace trace: Trace to check
    :rtype: list[Violation]
    """
    workload = trace.workload
    violations = []
    counts = defaultdict(int)
    by_server = defaultdict(list)
    for record in trace.task_records:
        if not 1 <= record.job <= workload.n:
            violations.append(Violation('unknown-job', record.start, (record.job,)))
            continue
        if not 1 <= record.server <= trace.servers:
            violations.append(Violation('unknown-server', record.start, (record.job, record.server)))
        counts[record.job] += 1
        if record.finish < record.start:
            violations.append(Violation('finish-before-start', record.start, (record.job, record.task_index),
                                        'finish %r < start %r' % (record.finish, record.start)))
        arrival = workload.job(record.job).arrival
        if record.start < arrival:
            violations.append(Violation('starts-before-arrival', record.start, (record.job, record.task_index),
                                        'arrival %r' % arrival))
        by_server[record.server].append(record)
    for job in workload.jobs:
        if counts[job.id] != job.size:
            violations.append(Violation('task-count', job.arrival, (job.id,),
                                        '%i records for %i tasks' % (counts[job.id], job.size)))
    for server, records in sorted(by_server.items()):
        records.sort(key=lambda r: (r.start, r.finish))
        for before, after in zip(records, records[1:]):
            if after.start < before.finish:
                violations.append(Violation('server-overlap', after.start,
                                            (server, (before.job, before.task_index), (after.job, after.task_index))))
    if not any(v.invariant == 'unknown-job' for v in violations):
        violations.extend(_state_violations(trace))
    if violations:
        _log.debug('Trace for policy %s has %i violations', trace.policy, len(violations))
    return violations


def _state_violations(trace):
    sizes = trace.workload.sizes
    found = []
    for t, xi, gamma in iter_states(trace):
        bad = np.flatnonzero((gamma < 0) | (gamma > xi) | (xi > sizes))
        if bad.size:
            found.append(Violation('state-bounds', t, tuple(int(i) + 1 for i in bad)))
        busy = int((xi - gamma).sum())
        if busy > trace.servers:
            found.append(Violation('too-many-in-service', t, (busy, trace.servers)))
    return found


def require_valid_trace(trace):
    violations = validate_trace(trace)
    require(not violations, "The trace for policy '%s' is invalid: %s", trace.policy,
            ', '.join('%s at t=%r' % (v.invariant, v.time) for v in violations[:5]))
