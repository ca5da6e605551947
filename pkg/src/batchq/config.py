"""
Scenario files: JSON (or YAML) documents describing a workload, a server bank, the policies and
metrics to compare, and the seeds to run.
"""
import logging
from dataclasses import dataclass, field, replace

from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from batchq import ConfigError
from batchq.engine import EngineConfig, ServerBank, ServerSelect, policy_from_name
from batchq.metrics import METRICS
from batchq.workloads import WorkloadSpec

_log = logging.getLogger(__name__)

DEFAULT_METRICS = ('d_avg', 'l_max', 'd_max', 'p2_norm', 'rms_tardiness', 'makespan')


@dataclass(frozen=True)
class Scenario:
    """
    :param WorkloadSpec workload: Workload to draw for every seed
    :param ServerBank servers: Server bank
    :param tuple[Policy] policies: Policies to compare
    :param tuple[str] metrics: Metric registry names
    :param int seeds: Number of seeds
    :param int base_seed: First seed
    :param tuple[float] rho_grid: Traffic intensities to sweep, empty for none
    :param EngineConfig engine: Engine options; the seed is set per trial
    :param tuple[str] ccdf_metrics: Metrics whose empirical CCDF is written
    :param int ccdf_points: Grid size of the CCDFs
    :param str output: Output directory
    """
    workload: WorkloadSpec
    servers: ServerBank
    policies: tuple
    metrics: tuple = DEFAULT_METRICS
    seeds: int = 1
    base_seed: int = 0
    rho_grid: tuple = ()
    engine: EngineConfig = field(default_factory=EngineConfig)
    ccdf_metrics: tuple = ()
    ccdf_points: int = 50
    output: str = 'out'

    def __post_init__(self):
        if not self.policies:
            raise ConfigError('A scenario needs at least one policy')
        if not self.metrics:
            raise ConfigError('A scenario needs at least one metric')
        if self.seeds < 1:
            raise ConfigError('A scenario needs at least one seed, got %r' % self.seeds)
        if self.base_seed < 0:
            raise ConfigError('Seeds must be nonnegative, got base seed %r' % self.base_seed)
        for name in tuple(self.metrics) + tuple(self.ccdf_metrics):
            if name not in METRICS:
                raise ConfigError('Unknown metric %r, expected one of %s' % (name, ', '.join(sorted(METRICS))))
        missing = set(self.ccdf_metrics) - set(self.metrics)
        if missing:
            raise ConfigError('CCDF metrics must also be reported metrics: %s' % ', '.join(sorted(missing)))

    @property
    def rhos(self):
        """Sweep points, or the single configured traffic intensity (None if not a paired law)."""
        if self.rho_grid:
            return tuple(self.rho_grid)
        return (self.workload.rho(list(self.servers.rates.values())),)

    def workload_at(self, rho):
        return self.workload if not self.rho_grid else self.workload.with_rho(rho)

    def override(self, **kwargs):
        """Copy with the non-None keyword arguments replaced."""
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def parse_scenario(data):
    """
    Builds a Scenario from a decoded document.

    :param dict data: Decoded scenario
    :rtype: Scenario
    :raises ConfigError: on any missing or invalid entry
    """
    if not isinstance(data, dict):
        raise ConfigError('A scenario must be a mapping, got %s' % type(data).__name__)
    try:
        seeds = data.get('seeds', {})
        engine = data.get('engine', {})
        ccdf = data.get('ccdf', {})
        tiebreak = engine.get('tiebreak')
        return Scenario(
            workload=WorkloadSpec.from_dict(data['workload']),
            servers=ServerBank.from_dicts(data['servers']),
            policies=tuple(policy_from_name(name) for name in data.get('policies', [])),
            metrics=tuple(data.get('metrics', DEFAULT_METRICS)),
            seeds=int(seeds.get('count', 1)),
            base_seed=int(seeds.get('base', 0)),
            rho_grid=tuple(float(rho) for rho in data.get('sweep', {}).get('rho', [])),
            engine=EngineConfig(server_select=ServerSelect(engine.get('server_select', 'fastest_rate')),
                                tiebreak=None if tiebreak is None else tuple(tiebreak)),
            ccdf_metrics=tuple(ccdf.get('metrics', [])),
            ccdf_points=int(ccdf.get('points', 50)),
            output=data.get('output', 'out'))
    except ConfigError:
        raise
    except KeyError as e:
        raise ConfigError('The scenario lacks the entry %s' % e)
    except (TypeError, ValueError, AttributeError) as e:
        raise ConfigError('Invalid scenario: %s' % e)


def load_scenario(path):
    """
    Reads a scenario file.

    :param str path: Path to a JSON or YAML scenario
    :rtype: Scenario
    """
    yaml = YAML(typ='safe')
    try:
        with open(path) as f:
            data = yaml.load(f)
    except (IOError, OSError) as e:
        raise ConfigError('Cannot read scenario %s: %s' % (path, e))
    except YAMLError as e:
        raise ConfigError('Cannot parse scenario %s: %s' % (path, e))
    scenario = parse_scenario(data)
    _log.info('Loaded scenario %s: %i jobs, %i servers, policies %s', path, scenario.workload.n,
              scenario.servers.m, ', '.join(p.tag for p in scenario.policies))
    return scenario
