"""
Discrete-event simulation of non-preemptive priority scheduling of batch jobs on m parallel
servers.

At each event time, completions are applied first, then arrivals (in id order), then idle
servers are filled one at a time: the server is chosen by the server-selection rule and the job
by the policy key among the jobs with unassigned tasks.
"""
import enum
import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from batchq import require
from batchq.distributions import from_dict as distribution_from_dict
from batchq.model import SystemState, TaskRecord, Trace, iter_states, reconstruct_state

_log = logging.getLogger(__name__)

# Substream keys. The j-th service on server l consumes the j-th uniform of (SERVICE_STREAM, l).
SERVICE_STREAM = 0
FRESH_STREAM = 1
PRIORITY_STREAM = 2


def substream(seed, stream, index):
    """
    An independent generator for substream ``(stream, index)`` of ``seed``.

    :param int seed: Nonnegative run seed
    :param int stream: Stream family, e.g. SERVICE_STREAM
    :param int index: Member of the family, e.g. a server id
    :rtype: numpy.random.Generator
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


# Job-key fields available as tie-breakers
_FIELDS = {
    'gamma': lambda job, gamma: gamma,
    'due': lambda job, gamma: job.due,
    'arrival': lambda job, gamma: job.arrival,
    'id': lambda job, gamma: job.id,
}


class Policy(object):
    """
    A non-preemptive priority rule: each idle server takes a task of the job with the smallest
    key among the jobs with unassigned tasks.
    """
    name = None
    default_tiebreak = ()

    def primary_key(self, job, gamma, priority):
        raise NotImplementedError()

    def key(self, job, gamma, tiebreak=None, priority=None):
        """
        Full sort key of a job: the policy key, the secondary keys, then the job id.

        :param JobSpec job: Candidate job
        :param int gamma: Its number of unassigned tasks
        :param tuple[str] tiebreak: Secondary keys, defaults to the policy's chain
        :param float priority: Per-job random priority, RandomOrder only
        """
        secondary = self.default_tiebreak if tiebreak is None else tiebreak
        return (self.primary_key(job, gamma, priority)
                + tuple(_FIELDS[name](job, gamma) for name in secondary)
                + (job.id,))

    def validate(self, workload):
        pass

    @property
    def tag(self):
        return self.name

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self), self.tag))

    def __repr__(self):
        return '%s(%r)' % (type(self).__name__, self.tag)


class FUT(Policy):
    """Fewest unassigned tasks first."""
    name = 'fut'
    default_tiebreak = ('due', 'arrival')

    def primary_key(self, job, gamma, priority):
        return (gamma,)


class EDD(Policy):
    """Earliest due date first."""
    name = 'edd'
    default_tiebreak = ('arrival', 'gamma')

    def primary_key(self, job, gamma, priority):
        return (job.due,)


class FCFS(Policy):
    name = 'fcfs'

    def primary_key(self, job, gamma, priority):
        return (job.arrival,)


class LIFO(Policy):
    """Latest arrival first."""
    name = 'lifo'

    def primary_key(self, job, gamma, priority):
        return (-job.arrival,)


class PriorityList(Policy):
    """Fixed priority order given as a permutation of the job ids."""
    name = 'priority'

    def __init__(self, order):
        self.order = tuple(int(i) for i in order)
        self._rank = {job_id: rank for rank, job_id in enumerate(self.order)}

    def primary_key(self, job, gamma, priority):
        return (self._rank[job.id],)

    def validate(self, workload):
        require(sorted(self.order) == list(range(1, workload.n + 1)),
                'A priority list must be a permutation of 1..%i, got %s', workload.n, self.order)

    @property
    def tag(self):
        return 'priority:' + ','.join(str(i) for i in self.order)

    def __eq__(self, other):
        return type(self) is type(other) and self.order == other.order


class RandomOrder(Policy):
    """
    Random priorities, drawn per job at its arrival from a dedicated substream of ``seed``
    (the run seed when ``seed`` is None).
    """
    name = 'random'

    def __init__(self, seed=None):
        self.seed = seed

    def primary_key(self, job, gamma, priority):
        return (priority,)

    def priority_stream(self, run_seed):
        return substream(run_seed if self.seed is None else self.seed, PRIORITY_STREAM, 0)

    def priorities(self, workload, run_seed):
        """The priority of every job, in job id order."""
        rng = self.priority_stream(run_seed)
        return {job.id: rng.random() for job in workload.jobs}

    @property
    def tag(self):
        return 'random' if self.seed is None else 'random:%i' % self.seed


_POLICIES = {'fut': FUT, 'edd': EDD, 'fcfs': FCFS, 'lifo': LIFO}


def policy_from_name(name):
    """
    Parses a policy name: fut, edd, fcfs, lifo, random, random:<seed> or priority:<id>,<id>,...

    >>> policy_from_name('random:7').seed
    7
    >>> policy_from_name('priority:2,1').order
    (2, 1)

    :param str name: Policy name
    :rtype: Policy
    """
    kind, _, argument = name.strip().lower().partition(':')
    if kind in _POLICIES and not argument:
        return _POLICIES[kind]()
    if kind == 'random':
        return RandomOrder(int(argument) if argument else None)
    if kind == 'priority' and argument:
        return PriorityList(int(i) for i in argument.split(','))
    raise ValueError('Unknown policy %r' % name)


class ServerSelect(enum.Enum):
    FASTEST_RATE = 'fastest_rate'
    LOWEST_ID = 'lowest_id'


@dataclass(frozen=True)
class Server:
    id: int
    distribution: object

    @property
    def rate(self):
        return self.distribution.service_rate


@dataclass(frozen=True)
class ServerBank:
    """m parallel servers with ids 1..m."""
    servers: tuple

    def __post_init__(self):
        object.__setattr__(self, 'servers', tuple(self.servers))
        if not self.servers:
            raise ValueError('A server bank needs at least one server')
        for index, server in enumerate(self.servers):
            if server.id != index + 1:
                raise ValueError('Server ids must be 1..m, found %i at position %i' % (server.id, index + 1))
            if not np.isfinite(server.distribution.mean()):
                raise ValueError('Server %i has no finite mean' % server.id)

    @classmethod
    def of(cls, distributions):
        """
        :param list[ServiceDistribution] distributions: One distribution per server
        :rtype: ServerBank
        """
        return cls(tuple(Server(l + 1, dist) for l, dist in enumerate(distributions)))

    @classmethod
    def from_dicts(cls, data):
        return cls.of([distribution_from_dict(d) for d in data])

    def to_dicts(self):
        return [server.distribution.to_dict() for server in self.servers]

    @property
    def m(self):
        return len(self.servers)

    @property
    def rates(self):
        return {server.id: server.rate for server in self.servers}

    @property
    def classes(self):
        return [server.distribution.classify() for server in self.servers]

    @property
    def all_nbu(self):
        return all(c.is_nbu for c in self.classes)

    def distribution(self, server_id):
        return self.servers[server_id - 1].distribution


@dataclass(frozen=True)
class EngineConfig:
    """
    :param ServerSelect server_select: Rule for picking among idle servers
    :param tuple[str] tiebreak: Secondary job keys after the policy key, None for the policy default
    :param int seed: Run seed
    :param tuple idle_injection: (server, start, end) periods during which a server takes no new task
    """
    server_select: ServerSelect = ServerSelect.FASTEST_RATE
    tiebreak: tuple = None
    seed: int = 0
    idle_injection: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'server_select', ServerSelect(self.server_select))
        if self.tiebreak is not None:
            object.__setattr__(self, 'tiebreak', tuple(self.tiebreak))
            for name in self.tiebreak:
                if name not in _FIELDS:
                    raise ValueError('Unknown tie-break key %r, expected one of %s' % (name, sorted(_FIELDS)))
        periods = tuple(sorted((int(l), float(b), float(e)) for l, b, e in self.idle_injection))
        for (l1, b1, e1), (l2, b2, e2) in zip(periods, periods[1:]):
            if l1 == l2 and b2 < e1:
                raise ValueError('Idle periods on server %i overlap' % l1)
        for l, b, e in periods:
            if not b < e:
                raise ValueError('Idle period (%r, %r) on server %i is empty' % (b, e, l))
        object.__setattr__(self, 'idle_injection', periods)
        if self.seed < 0:
            raise ValueError('Seeds must be nonnegative, got %r' % self.seed)

    def blocked(self, server_id, t):
        return any(l == server_id and b <= t < e for l, b, e in self.idle_injection)


@dataclass(frozen=True)
class ServiceDraw:
    start: float
    job: int
    task_index: int
    uniform: float
    duration: float


class SubstreamSampler(object):
    """
    Draws service times by inverse transform, one independent substream per server. Every draw
    is logged per server in the order it was made.
    """

    def __init__(self, bank, seed, stream=SERVICE_STREAM):
        self.bank = bank
        self._streams = {server.id: substream(seed, stream, server.id) for server in bank.servers}
        self._tasks = {}
        self.draws = {server.id: [] for server in bank.servers}

    def uniform(self, server_id):
        return float(self._streams[server_id].random())

    def next_task_index(self, job_id):
        self._tasks[job_id] = self._tasks.get(job_id, 0) + 1
        return self._tasks[job_id]

    def complete(self, server_id, job_id, start):
        """Completion time of a task of ``job_id`` started on ``server_id`` at ``start``."""
        u = self.uniform(server_id)
        duration = self.bank.distribution(server_id).quantile(u)
        self.draws[server_id].append(ServiceDraw(start, job_id, self.next_task_index(job_id), u, duration))
        return start + duration


def select_job(state, workload, policy, tiebreak=None, priorities=None, queue=None):
    """
    The job whose task starts next: the smallest policy key among queued jobs with unassigned
    tasks.

    :param SystemState state: Current state
    :param Workload workload: Job parameters
    :param Policy policy: Priority rule
    :param tuple[str] tiebreak: Secondary keys, None for the policy default
    :param dict priorities: Job id to random priority, RandomOrder only
    :param set[int] queue: Jobs in the system, defaults to those with remaining tasks
    :rtype: int
    """
    queue = state.queue if queue is None else queue
    candidates = [i for i in queue if state.gamma[i - 1] > 0]
    if not candidates:
        raise ValueError('No job with unassigned tasks at t=%r' % state.time)
    priorities = priorities or {}
    return min(candidates, key=lambda i: policy.key(workload.job(i), state.gamma[i - 1],
                                                    tiebreak, priorities.get(i)))


def select_server(idle, rule=ServerSelect.FASTEST_RATE, rates=None):
    """
    :param iterable[int] idle: Ids of idle servers
    :param ServerSelect rule: FASTEST_RATE picks the highest rate, ties by lowest id
    :param dict[int, float] rates: Server id to service rate, needed for FASTEST_RATE
    :rtype: int
    """
    idle = list(idle)
    if ServerSelect(rule) is ServerSelect.LOWEST_ID:
        return min(idle)
    return min(idle, key=lambda l: (-rates[l], l))


def simulate(workload, servers, policy, config=None, sampler=None):
    """
    Runs ``policy`` on ``workload`` until every task has completed.

    :param Workload workload: Job parameters
    :param ServerBank servers: Server bank
    :param Policy policy: Scheduling policy
    :param EngineConfig config: Engine options, defaults to EngineConfig()
    :param sampler: Source of completion times with a ``complete(server, job, start)`` method,
           defaults to a SubstreamSampler on the config seed
    :rtype: Trace
    """
    config = config or EngineConfig()
    policy.validate(workload)
    if sampler is None:
        sampler = SubstreamSampler(servers, config.seed)
    rates = servers.rates
    priority_rng = policy.priority_stream(config.seed) if isinstance(policy, RandomOrder) else None
    priorities = {}

    jobs = workload.jobs
    gamma = [0] * (workload.n + 1)
    started = [0] * (workload.n + 1)
    candidates = []
    completions = []
    idle = set(rates)
    wakes = [e for _, _, e in config.idle_injection]
    heapq.heapify(wakes)
    records = []
    next_arrival = 0

    while next_arrival < len(jobs) or completions or (candidates and wakes):
        horizon = []
        if next_arrival < len(jobs):
            horizon.append(jobs[next_arrival].arrival)
        if completions:
            horizon.append(completions[0][0])
        if candidates and wakes:
            horizon.append(wakes[0])
        t = min(horizon)
        while completions and completions[0][0] == t:
            _, server_id, _ = heapq.heappop(completions)
            idle.add(server_id)
        while next_arrival < len(jobs) and jobs[next_arrival].arrival == t:
            job = jobs[next_arrival]
            gamma[job.id] = job.size
            if priority_rng is not None:
                priorities[job.id] = float(priority_rng.random())
            heapq.heappush(candidates, (policy.key(job, job.size, config.tiebreak, priorities.get(job.id)), job.id))
            next_arrival += 1
        while wakes and wakes[0] <= t:
            heapq.heappop(wakes)
        while candidates and idle:
            available = [l for l in idle if not config.blocked(l, t)]
            if not available:
                break
            server_id = select_server(available, config.server_select, rates)
            _, job_id = heapq.heappop(candidates)
            job = workload.job(job_id)
            gamma[job_id] -= 1
            if gamma[job_id] > 0:
                heapq.heappush(candidates, (policy.key(job, gamma[job_id], config.tiebreak, priorities.get(job_id)),
                                            job_id))
            idle.discard(server_id)
            started[job_id] += 1
            finish = sampler.complete(server_id, job_id, t)
            records.append(TaskRecord(job_id, started[job_id], server_id, t, finish))
            heapq.heappush(completions, (finish, server_id, job_id))

    _log.debug('Policy %s completed %i tasks of %i jobs on %i servers', policy.tag, len(records),
               workload.n, servers.m)
    return Trace(workload, servers.m, policy.tag, tuple(records), config.seed)


def replay_conformance(trace, policy, config=None):
    """
    Replays every service start of a trace against ``select_job`` on the reconstructed state.
    Starts sharing a timestamp are matched as a multiset, since their order among servers is
    not recorded.

    :param Trace trace: Trace produced by ``policy``
    :param Policy policy: Policy to check against
    :param EngineConfig config: Config of the run (tie-break and seed)
    :return: (time, expected job, started jobs) for each start that the policy would not make
    :rtype: list[tuple]
    """
    config = config or EngineConfig(seed=trace.rng_seed)
    workload = trace.workload
    priorities = policy.priorities(workload, config.seed) if isinstance(policy, RandomOrder) else None
    by_time = {}
    for record in trace.task_records:
        by_time.setdefault(record.start, []).append(record.job)
    mismatches = []
    for t in sorted(by_time):
        state = reconstruct_state(trace, t)
        gamma = list(state.gamma)
        for job_id in by_time[t]:
            gamma[job_id - 1] += 1
        pending = list(by_time[t])
        while pending:
            current = SystemState(state.xi, tuple(gamma), t)
            expected = select_job(current, workload, policy, config.tiebreak, priorities)
            if expected in pending:
                pending.remove(expected)
                gamma[expected - 1] -= 1
            else:
                mismatches.append((t, expected, tuple(pending)))
                break
    return mismatches


def check_work_conservation(trace):
    """
    Event times at which a server is idle while tasks wait unassigned.

    :param Trace trace: Trace without idle injection
    :rtype: list[float]
    """
    idle_times = []
    for t, xi, gamma in iter_states(trace):
        if gamma.sum() > 0 and (xi - gamma).sum() < trace.servers:
            idle_times.append(t)
    return idle_times
