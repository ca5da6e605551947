"""
Service-time distributions sampled by inverse transform.

Every draw is ``quantile(u)`` for an explicit uniform ``u`` in [0, 1), so two runs can share
uniforms. ``residual_quantile`` inverts the conditional law of the remaining service time after
``elapsed`` units of service.
"""
import enum
import itertools
import logging
from abc import ABCMeta, abstractmethod
from dataclasses import asdict, dataclass

import numpy as np

_log = logging.getLogger(__name__)

NUMERIC_TOLERANCE = 1e-12


class DistributionClass(enum.Enum):
    NBU = 'nbu'
    NWU = 'nwu'
    NBU_AND_NWU = 'nbu_and_nwu'
    UNKNOWN = 'unknown'

    @property
    def is_nbu(self):
        return self in (DistributionClass.NBU, DistributionClass.NBU_AND_NWU)


def _check_uniform(u):
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u >= 1)) or np.any(np.isnan(u)):
        raise ValueError('Uniforms must lie in [0, 1), got %r' % (u.tolist(),))
    return u


def _check_time(x, name='x'):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValueError('%s must be nonnegative, got %r' % (name, x.tolist()))
    return x


def _result(value):
    return float(value) if np.ndim(value) == 0 else value


class ServiceDistribution(metaclass=ABCMeta):
    kind = None

    def survival(self, x):
        """
        Complementary CDF Pr[X > x].

        :param float|numpy.ndarray x: Nonnegative time(s)
        """
        return _result(self._survival(_check_time(x)))

    def quantile(self, u):
        """
        Generalized inverse inf{x : 1 - survival(x) >= u}.

        :param float|numpy.ndarray u: Uniform(s) in [0, 1)
        """
        return _result(self._quantile(_check_uniform(u)))

    def residual_quantile(self, elapsed, u):
        """
        Quantile of the remaining service time of a task that has been in service for
        ``elapsed``: the law with survival survival(elapsed + s) / survival(elapsed).

        :param float elapsed: Service received so far
        :param float u: Uniform in [0, 1)
        """
        elapsed = float(_check_time(elapsed, 'elapsed'))
        if self._survival(np.asarray(elapsed)) <= 0:
            raise ValueError('%s cannot still be in service after %r' % (self, elapsed))
        return _result(self._residual_quantile(elapsed, _check_uniform(u)))

    def sample(self, rng, size=None):
        """
        Draws by inverse transform from ``rng.random``.

        :param numpy.random.Generator rng: Source of uniforms
        """
        return self.quantile(rng.random(size))

    @property
    def service_rate(self):
        """Service rate 1 / E[X]."""
        mean = self.mean()
        return 1.0 / mean if mean > 0 else float('inf')

    @abstractmethod
    def mean(self):
        raise NotImplementedError()

    @abstractmethod
    def classify(self):
        raise NotImplementedError()

    @abstractmethod
    def _survival(self, x):
        raise NotImplementedError()

    @abstractmethod
    def _quantile(self, u):
        raise NotImplementedError()

    @abstractmethod
    def _residual_quantile(self, elapsed, u):
        raise NotImplementedError()

    def to_dict(self):
        return dict(kind=self.kind, **asdict(self))


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    kind = 'exponential'
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError('Exponential rate must be positive, got %r' % self.rate)

    def mean(self):
        return 1.0 / self.rate

    def classify(self):
        return DistributionClass.NBU_AND_NWU

    def _survival(self, x):
        return np.exp(-self.rate * x)

    def _quantile(self, u):
        return -np.log1p(-u) / self.rate

    def _residual_quantile(self, elapsed, u):
        # memoryless
        return self._quantile(u)


@dataclass(frozen=True)
class ShiftedExponential(ServiceDistribution):
    kind = 'shifted_exponential'
    shift: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        if not self.shift >= 0:
            raise ValueError('Shift must be nonnegative, got %r' % self.shift)
        if not self.rate > 0:
            raise ValueError('Rate must be positive, got %r' % self.rate)

    @classmethod
    def with_service_rate(cls, mu):
        """
        Shift 1/(3 mu) and exponential rate 3 mu / 2, so that the mean is 1 / mu.
        """
        return cls(shift=1.0 / (3 * mu), rate=3 * mu / 2.0)

    def mean(self):
        return self.shift + 1.0 / self.rate

    def classify(self):
        return DistributionClass.NBU

    def _survival(self, x):
        return np.where(x < self.shift, 1.0, np.exp(-self.rate * (x - self.shift)))

    def _quantile(self, u):
        return self.shift - np.log1p(-u) / self.rate

    def _residual_quantile(self, elapsed, u):
        if elapsed < self.shift:
            return self._quantile(u) - elapsed
        return -np.log1p(-u) / self.rate


@dataclass(frozen=True)
class ParetoLomax(ServiceDistribution):
    """Pareto type II: survival (1 + x / sigma) ** -alpha."""
    kind = 'pareto_lomax'
    sigma: float = 1.0
    alpha: float = 2.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError('sigma must be positive, got %r' % self.sigma)
        if not self.alpha > 1:
            raise ValueError('alpha must exceed 1 for a finite mean, got %r' % self.alpha)

    def mean(self):
        return self.sigma / (self.alpha - 1)

    def classify(self):
        return DistributionClass.NWU

    def _survival(self, x):
        return (1 + x / self.sigma) ** -self.alpha

    def _quantile(self, u):
        return self.sigma * ((1 - u) ** (-1.0 / self.alpha) - 1)

    def _residual_quantile(self, elapsed, u):
        return (self.sigma + elapsed) * ((1 - u) ** (-1.0 / self.alpha) - 1)


@dataclass(frozen=True)
class Deterministic(ServiceDistribution):
    kind = 'deterministic'
    value: float = 1.0

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError('Deterministic value must be nonnegative, got %r' % self.value)

    def mean(self):
        return self.value

    def classify(self):
        return DistributionClass.NBU

    def _survival(self, x):
        return np.where(x < self.value, 1.0, 0.0)

    def _quantile(self, u):
        return np.full_like(u, self.value)

    def _residual_quantile(self, elapsed, u):
        return np.full_like(u, self.value - elapsed)


def classify_numeric(dist, grid):
    """
    Classifies a distribution by checking survival(tau + t) against survival(tau) * survival(t)
    on a grid of (tau, t) pairs.

    :param ServiceDistribution dist: Distribution to classify
    :param list[tuple[float, float]] grid: Nonempty list of nonnegative pairs
    :rtype: DistributionClass
    """
    pairs = np.asarray(list(grid), dtype=float)
    if pairs.size == 0:
        raise ValueError('The classification grid must not be empty')
    tau, t = pairs[:, 0], pairs[:, 1]
    joint = np.atleast_1d(dist.survival(tau + t))
    product = np.atleast_1d(dist.survival(tau)) * np.atleast_1d(dist.survival(t))
    nbu = bool(np.all(joint <= product + NUMERIC_TOLERANCE))
    nwu = bool(np.all(joint >= product - NUMERIC_TOLERANCE))
    if nbu and nwu:
        return DistributionClass.NBU_AND_NWU
    if nbu:
        return DistributionClass.NBU
    if nwu:
        return DistributionClass.NWU
    return DistributionClass.UNKNOWN


def product_grid(points):
    """All (tau, t) pairs over a list of points."""
    return list(itertools.product(points, points))


_KINDS = {
    'exponential': lambda d: Exponential(rate=float(d['rate'])),
    'shifted_exponential': lambda d: (ShiftedExponential.with_service_rate(float(d['mu'])) if 'mu' in d
                                    else ShiftedExponential(shift=float(d['shift']), rate=float(d['rate']))),
    'pareto_lomax': lambda d: ParetoLomax(sigma=float(d['sigma']), alpha=float(d['alpha'])),
    'deterministic': lambda d: Deterministic(value=float(d['value'])),
}


def from_dict(data):
    """
    Decodes the JSON form ``{"kind": ..., <parameters>}``.

    >>> from_dict({'kind': 'exponential', 'rate': 2.0}).mean()
    0.5

    :param dict data: Encoded distribution
    :rtype: ServiceDistribution
    """
    try:
        decode = _KINDS[data['kind']]
    except KeyError:
        raise ValueError('Unknown service distribution %r' % (data,))
    try:
        return decode(data)
    except KeyError as e:
        raise ValueError('Service distribution %r lacks parameter %s' % (data, e))
