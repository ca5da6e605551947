"""
Random workload generation.

Arrivals, sizes and due times each draw from their own substream of the workload seed, so
changing one law leaves the draws of the others untouched.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from batchq.engine import substream
from batchq.model import Workload

_log = logging.getLogger(__name__)

WORKLOAD_STREAM = 3
_GAPS, _SIZES, _DUES = 0, 1, 2


def _probabilities(probs, count, what):
    probs = np.asarray(probs, dtype=float)
    if probs.size != count:
        raise ValueError('%s needs %i probabilities, got %i' % (what, count, probs.size))
    if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
        raise ValueError('%s probabilities must be nonnegative and sum to 1, got %s' % (what, probs.tolist()))
    return probs


@dataclass(frozen=True)
class SizeLaw:
    """Constant size k, or a choice among ``values`` with ``probs``."""
    kind: str = 'constant'
    k: int = 1
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == 'constant':
            if self.k < 1:
                raise ValueError('Job sizes must be positive, got %r' % self.k)
        elif self.kind == 'choice':
            if not self.values or min(self.values) < 1:
                raise ValueError('Size choices must be positive, got %r' % (self.values,))
            _probabilities(self.probs, len(self.values), 'The size law')
        else:
            raise ValueError('Unknown size law %r' % self.kind)

    @property
    def mean(self):
        if self.kind == 'constant':
            return float(self.k)
        return float(np.dot(self.values, self.probs))

    def draw(self, rng, n):
        if self.kind == 'constant':
            return np.full(n, self.k, dtype=int)
        return rng.choice(np.asarray(self.values, dtype=int), size=n, p=_probabilities(self.probs, len(self.values),
                                                                                    'The size law'))


@dataclass(frozen=True)
class DueLaw:
    """Due time equal to the arrival, arrival plus ``offset``, or arrival plus a random offset."""
    kind: str = 'equal_to_arrival'
    offset: float = 0.0
    offsets: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind == 'arrival_plus_choice':
            _probabilities(self.probs, len(self.offsets), 'The due law')
        elif self.kind not in ('equal_to_arrival', 'arrival_plus'):
            raise ValueError('Unknown due law %r' % self.kind)
        if self.offset < 0 or any(o < 0 for o in self.offsets):
            raise ValueError('Due offsets must be nonnegative')

    def draw(self, rng, arrivals):
        if self.kind == 'equal_to_arrival':
            return arrivals.copy()
        if self.kind == 'arrival_plus':
            return arrivals + self.offset
        offsets = rng.choice(np.asarray(self.offsets, dtype=float), size=arrivals.size,
                             p=_probabilities(self.probs, len(self.offsets), 'The due law'))
        return arrivals + offsets


@dataclass(frozen=True)
class ArrivalLaw:
    """
    ``paired_exponential``: jobs arrive in pairs, pairs separated by exponential gaps of mean
    ``mean_gap`` (or the gap that yields traffic intensity ``rho``). ``poisson``: single arrivals
    at ``rate``. ``explicit``: the given ``times``.
    """
    kind: str = 'paired_exponential'
    mean_gap: float = None
    rho: float = None
    rate: float = None
    times: tuple = ()

    def __post_init__(self):
        if self.kind == 'paired_exponential':
            if (self.mean_gap is None) == (self.rho is None):
                raise ValueError('Paired arrivals need exactly one of mean_gap and rho')
            if self.mean_gap is not None and self.mean_gap <= 0:
                raise ValueError('The mean gap must be positive, got %r' % self.mean_gap)
            if self.rho is not None and self.rho <= 0:
                raise ValueError('rho must be positive, got %r' % self.rho)
        elif self.kind == 'poisson':
            if self.rate is None or self.rate <= 0:
                raise ValueError('Poisson arrivals need a positive rate, got %r' % self.rate)
        elif self.kind == 'explicit':
            times = np.asarray(self.times, dtype=float)
            if times.size == 0 or times[0] != 0:
                raise ValueError('Explicit arrivals must start at time 0, got %r' % (list(self.times),))
            if np.any(np.diff(times) < 0) or not np.all(np.isfinite(times)):
                raise ValueError('Explicit arrivals must be finite and nondecreasing, got %r' % (list(self.times),))
        else:
            raise ValueError('Unknown arrival law %r' % self.kind)

    def draw(self, rng, n, mean_gap=None):
        if self.kind == 'explicit':
            if len(self.times) != n:
                raise ValueError('Explicit arrivals list %i times for %i jobs' % (len(self.times), n))
            return np.asarray(self.times, dtype=float)
        if self.kind == 'poisson':
            return np.concatenate([[0.0], np.cumsum(rng.exponential(1.0 / self.rate, n - 1))])[:n]
        pairs = (n + 1) // 2
        starts = np.concatenate([[0.0], np.cumsum(rng.exponential(mean_gap, pairs - 1))])
        return np.repeat(starts, 2)[:n]


@dataclass(frozen=True)
class WorkloadSpec:
    n: int
    size_law: SizeLaw = field(default_factory=SizeLaw)
    due_law: DueLaw = field(default_factory=DueLaw)
    arrival_law: ArrivalLaw = field(default_factory=lambda: ArrivalLaw(mean_gap=1.0))
    seed: int = 0
    sizes: tuple = None
    dues: tuple = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError('A workload needs at least one job, got n=%r' % self.n)
        for name in ('sizes', 'dues'):
            values = getattr(self, name)
            if values is not None and len(values) != self.n:
                raise ValueError('Explicit %s list %i entries for %i jobs' % (name, len(values), self.n))
        if self.arrival_law.kind == 'explicit' and len(self.arrival_law.times) != self.n:
            raise ValueError('Explicit arrivals list %i times for %i jobs' % (len(self.arrival_law.times), self.n))
        if self.sizes is not None and min(self.sizes) < 1:
            raise ValueError('Every job needs at least one task, got sizes %r' % (list(self.sizes),))

    def with_rho(self, rho):
        """The same spec with paired arrivals at traffic intensity ``rho``."""
        return replace(self, arrival_law=ArrivalLaw('paired_exponential', rho=rho))

    def with_seed(self, seed):
        return replace(self, seed=seed)

    @property
    def mean_size(self):
        if self.sizes is not None:
            return float(np.mean(self.sizes))
        return self.size_law.mean

    def mean_gap(self, mus=None):
        law = self.arrival_law
        if law.kind != 'paired_exponential':
            return None
        if law.mean_gap is not None:
            return law.mean_gap
        if mus is None:
            raise ValueError('Resolving rho=%r into a mean gap needs the service rates' % law.rho)
        return mean_gap_for_rho(law.rho, self.mean_size, mus)

    def rho(self, mus):
        """Traffic intensity of paired arrivals on servers with rates ``mus``, None otherwise."""
        law = self.arrival_law
        if law.kind != 'paired_exponential':
            return None
        if law.rho is not None:
            return law.rho
        return rho_for_mean_gap(law.mean_gap, self.mean_size, mus)

    @classmethod
    def from_dict(cls, data, seed=0):
        """
        Decodes the scenario form: ``{"n": ..., "size_law": {...}, "due_law": {...},
        "arrival_law": {...}}``.
        """
        size = dict(data.get('size_law', {'kind': 'constant', 'k': 1}))
        due = dict(data.get('due_law', {'kind': 'equal_to_arrival'}))
        arrival = dict(data.get('arrival_law', {'kind': 'paired_exponential', 'mean_gap': 1.0}))
        for law in (size, due):
            for key in ('values', 'probs', 'offsets'):
                if key in law:
                    law[key] = tuple(law[key])
        if 'times' in arrival:
            arrival['times'] = tuple(arrival['times'])
        sizes = tuple(int(k) for k in data['sizes']) if 'sizes' in data else None
        dues = tuple(float(d) for d in data['dues']) if 'dues' in data else None
        return cls(int(data['n']), SizeLaw(**size), DueLaw(**due), ArrivalLaw(**arrival), seed, sizes, dues)


def generate(spec, mus=None):
    """
    Draws a workload. Deterministic in ``spec`` (including its seed).

    :param WorkloadSpec spec: What to draw
    :param list[float] mus: Service rates, needed when arrivals are given by rho
    :rtype: Workload
    """
    n = spec.n
    arrivals = spec.arrival_law.draw(substream(spec.seed, WORKLOAD_STREAM, _GAPS), n, spec.mean_gap(mus))
    if spec.sizes is None:
        sizes = spec.size_law.draw(substream(spec.seed, WORKLOAD_STREAM, _SIZES), n)
    else:
        sizes = np.asarray(spec.sizes, dtype=int)
    if spec.dues is None:
        dues = spec.due_law.draw(substream(spec.seed, WORKLOAD_STREAM, _DUES), arrivals)
    else:
        dues = np.asarray(spec.dues, dtype=float)
    _log.debug('Generated %i jobs with %i tasks from seed %i', n, int(sizes.sum()), spec.seed)
    return Workload.from_arrays(arrivals.tolist(), sizes.tolist(), dues.tolist())


def mean_gap_for_rho(rho, mean_size, mus):
    """
    Mean gap between arrival pairs giving traffic intensity ``rho``: two jobs of ``mean_size``
    tasks per gap against total service rate sum(mus).

    >>> mean_gap_for_rho(0.5, 1, [1, 1])
    2.0
    """
    total = float(np.sum(mus))
    if rho <= 0:
        raise ValueError('rho must be positive, got %r' % rho)
    if mean_size <= 0:
        raise ValueError('The mean job size must be positive, got %r' % mean_size)
    if total <= 0:
        raise ValueError('The total service rate must be positive, got %r' % total)
    return 2.0 * mean_size / (rho * total)


def rho_for_mean_gap(mean_gap, mean_size, mus):
    """Traffic intensity of paired arrivals with the given mean gap."""
    total = float(np.sum(mus))
    if mean_gap <= 0 or mean_size <= 0 or total <= 0:
        raise ValueError('mean_gap, mean_size and the total rate must be positive')
    return 2.0 * mean_size / (mean_gap * total)
