"""
Jobs, workloads, system state and traces.

Job ids and server ids are 1-based. Internally, per-job arrays are indexed by ``id - 1``.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from batchq import IncompleteTraceError

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class JobSpec:
    """
    A batch job of ``size`` unit tasks.

    :param int id: Job index, 1-based and dense in arrival order
    :param float arrival: Arrival time a_i
    :param int size: Number of tasks k_i
    :param float due: Due time d_i
    """
    id: int
    arrival: float
    size: int
    due: float

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise ValueError('Job %s must have a positive integer size, got %r' % (self.id, self.size))
        for name in ('arrival', 'due'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError('Job %s has invalid %s time %r' % (self.id, name, value))


@dataclass(frozen=True)
class Workload:
    """
    The job parameters of one instance: arrival times, sizes and due times of n jobs.
    """
    jobs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'jobs', tuple(self.jobs))
        previous = None
        for index, job in enumerate(self.jobs):
            if job.id != index + 1:
                raise ValueError('Job ids must be 1..n in arrival order, found %i at position %i'
                                 % (job.id, index + 1))
            if previous is not None and job.arrival < previous:
                raise ValueError('Arrivals must be nondecreasing, job %i arrives at %r before %r'
                                 % (job.id, job.arrival, previous))
            previous = job.arrival
        if self.jobs and self.jobs[0].arrival != 0:
            raise ValueError('The first job must arrive at time 0, got %r' % self.jobs[0].arrival)

    @classmethod
    def from_arrays(cls, arrivals, sizes, dues=None):
        """
        Builds a workload from parallel sequences. Dues default to the arrival times.

        :param list[float] arrivals: Nondecreasing arrival times, first one 0
        :param list[int] sizes: Task counts
        :param list[float] dues: Due times
        :rtype: Workload
        """
        if dues is None:
            dues = arrivals
        if not len(arrivals) == len(sizes) == len(dues):
            raise ValueError('arrivals, sizes and dues must have equal lengths')
        return cls(tuple(JobSpec(i + 1, float(a), int(k), float(d))
                         for i, (a, k, d) in enumerate(zip(arrivals, sizes, dues))))

    @property
    def n(self):
        return len(self.jobs)

    @cached_property
    def arrivals(self):
        return np.array([job.arrival for job in self.jobs], dtype=float)

    @cached_property
    def sizes(self):
        return np.array([job.size for job in self.jobs], dtype=int)

    @cached_property
    def dues(self):
        return np.array([job.due for job in self.jobs], dtype=float)

    @property
    def k_max(self):
        return int(self.sizes.max()) if self.jobs else 0

    @property
    def total_tasks(self):
        return int(self.sizes.sum())

    def job(self, job_id):
        return self.jobs[job_id - 1]

    def to_dict(self):
        return {'arrivals': self.arrivals.tolist(),
                'sizes': self.sizes.tolist(),
                'dues': self.dues.tolist()}

    @classmethod
    def from_dict(cls, data):
        return cls.from_arrays(data['arrivals'], data['sizes'], data.get('dues'))


@dataclass(frozen=True)
class SystemState:
    """
    The state (xi, gamma) at time ``time``: remaining and unassigned tasks per job.
    """
    xi: tuple
    gamma: tuple
    time: float

    @property
    def queue(self):
        """Ids of the jobs present in the system."""
        return frozenset(i + 1 for i, x in enumerate(self.xi) if x > 0)

    @property
    def in_service(self):
        return sum(x - g for x, g in zip(self.xi, self.gamma))


@dataclass(frozen=True)
class TaskRecord:
    job: int
    task_index: int
    server: int
    start: float
    finish: float

    @property
    def duration(self):
        return self.finish - self.start


@dataclass(frozen=True)
class Trace:
    """
    The event log of one run: every task's service interval, plus what is needed to
    reconstruct the state path.

    :param Workload workload: The instance that was run
    :param int servers: Number of servers m
    :param str policy: Tag of the policy that produced the trace
    :param tuple[TaskRecord] task_records: One record per task
    :param int rng_seed: Seed of the run
    """
    workload: Workload
    servers: int
    policy: str
    task_records: tuple = ()
    rng_seed: int = 0
    event_times: tuple = field(init=False)

    def __post_init__(self):
        records = tuple(sorted(self.task_records, key=lambda r: (r.start, r.server, r.job, r.task_index)))
        object.__setattr__(self, 'task_records', records)
        times = set(self.workload.arrivals.tolist())
        for record in records:
            times.add(record.start)
            times.add(record.finish)
        object.__setattr__(self, 'event_times', tuple(sorted(times)))

    def records_of(self, job_id):
        return [r for r in self.task_records if r.job == job_id]

    @cached_property
    def starts(self):
        return np.array([r.start for r in self.task_records], dtype=float)

    @cached_property
    def finishes(self):
        return np.array([r.finish for r in self.task_records], dtype=float)

    @cached_property
    def record_jobs(self):
        return np.array([r.job for r in self.task_records], dtype=int)


def reconstruct_state(trace, t):
    """
    Returns the right-continuous state (xi(t), gamma(t)) implied by the arrivals and records.
    All events stamped ``t`` are applied.

    :param Trace trace: A trace
    :param float t: Time, t >= 0
    :rtype: SystemState
    """
    if t < 0:
        raise ValueError('State is only defined for t >= 0, got %r' % t)
    workload = trace.workload
    n = workload.n
    arrived = workload.arrivals <= t
    jobs = trace.record_jobs - 1
    started = np.bincount(jobs[trace.starts <= t], minlength=n) if n else np.zeros(0, dtype=int)
    finished = np.bincount(jobs[trace.finishes <= t], minlength=n) if n else np.zeros(0, dtype=int)
    xi = np.where(arrived, workload.sizes - finished, 0)
    gamma = np.where(arrived, workload.sizes - started, 0)
    return SystemState(tuple(int(x) for x in xi), tuple(int(g) for g in gamma), t)


def iter_states(trace, times=None):
    """
    Sweeps the state path of a trace, yielding ``(t, xi, gamma)`` at each requested time in
    increasing order. The arrays are reused between iterations; copy them to keep them.

    :param Trace trace: A trace
    :param list[float] times: Sorted evaluation times, defaults to the trace's event times
    """
    workload = trace.workload
    xi = np.zeros(workload.n, dtype=int)
    gamma = np.zeros(workload.n, dtype=int)
    # (time, kind, job index, delta); kind only makes the sort deterministic
    events = [(a, 0, i, int(k)) for i, (a, k) in enumerate(zip(workload.arrivals, workload.sizes))]
    events.extend((r.finish, 1, r.job - 1, -1) for r in trace.task_records)
    events.extend((r.start, 2, r.job - 1, -1) for r in trace.task_records)
    events.sort()
    times = trace.event_times if times is None else times
    position = 0
    for t in times:
        while position < len(events) and events[position][0] <= t:
            _, kind, index, delta = events[position]
            if kind == 0:
                xi[index] += delta
                gamma[index] += delta
            elif kind == 1:
                xi[index] += delta
            else:
                gamma[index] += delta
            position += 1
        yield t, xi, gamma


def departure_times(trace):
    """
    Completion time of every job: the finish of its last task.

    :param Trace trace: A complete trace
    :return: Map of job id to completion time
    :rtype: dict[int, float]
    """
    workload = trace.workload
    counts = np.bincount(trace.record_jobs - 1, minlength=workload.n) if workload.n else []
    for job in workload.jobs:
        if counts[job.id - 1] < job.size:
            raise IncompleteTraceError('Job %i has %i of its %i task records'
                                       % (job.id, counts[job.id - 1], job.size))
    completion = {}
    for record in trace.task_records:
        completion[record.job] = max(completion.get(record.job, record.finish), record.finish)
    return {job.id: completion[job.id] for job in workload.jobs}
