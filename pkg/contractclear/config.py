"""Scenario configuration files.

A scenario is a JSON document with four optional sections::

    {
        "population": {"n": 20, "alpha": [5, 20], "beta": [0.5, 5]},
        "contract": {"m": 100, "tau": 0.5, "g": 1.0},
        "algo": {"step": {"kind": "constant", "eta": null}, "gamma": 1e-6},
        "experiment": {"replications": 1000, "master_seed": 0}
    }

Every key falls back to its default when omitted; unknown keys are
rejected so that typos surface instead of silently reverting to defaults.
See ``docs/config.rst`` for the full schema.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .agent import ContractParams, Population
from .clearing import AlgoConfig
from .errors import ConfigurationError, InvalidArgument
from .mechanisms import MechanismKind
from .schedule import schedule_from_dict
from .utils import ENV_JOBS, MISSING, digest, env_int

log = logging.getLogger(__name__)

__all__ = (
    'UniformDist',
    'ShockConfig',
    'RegretConfig',
    'MovieLensConfig',
    'ScenarioConfig',
    'parse_scenario_config',
    'scenario_from_dict',
    'scenario_to_dict',
    'write_scenario_config',
    'config_digest',
)

ALL_MECHANISMS = (
    MechanismKind.no_enforcement(),
    MechanismKind.proportional(),
    MechanismKind.flat_contract(),
    MechanismKind.proposed_equilibrium(),
)


@dataclass(frozen=True)
class UniformDist:
    """A uniform distribution on ``[lo, hi]``. ``lo == hi`` is a point mass."""
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidArgument('distribution bounds must be finite')
        if self.lo <= 0:
            raise InvalidArgument(f'lower bound must be positive, not {self.lo!r}')
        if self.lo > self.hi:
            raise InvalidArgument(f'lower bound {self.lo!r} exceeds upper bound {self.hi!r}')

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_list(self):
        return [self.lo, self.hi]


@dataclass(frozen=True)
class ShockConfig:
    """A one-time fee and/or demand shock.

    ``tau`` steps from ``tau_pre`` to ``tau_post`` and every ``alpha`` is
    multiplied by ``alpha_scale_post`` from round ``t0`` on.
    """
    t0: int = 50
    horizon: int = 200
    tau_pre: float = 0.5
    tau_post: float = 1.5
    alpha_scale_post: float = 1.0
    window: int = 30
    sustain: int = 10

    def __post_init__(self):
        if not 0 < self.t0 < self.horizon:
            raise ConfigurationError('must satisfy 0 < t0 < horizon', key='experiment.shock.t0')
        if self.window <= 0 or self.sustain <= 0:
            raise ConfigurationError('window and sustain must be positive', key='experiment.shock.window')
        if self.t0 < self.window or self.horizon - self.t0 < self.window:
            raise ConfigurationError(
                'horizon too short: need window rounds on both sides of t0', key='experiment.shock.horizon'
            )
        if self.alpha_scale_post <= 0:
            raise ConfigurationError('must be positive', key='experiment.shock.alpha_scale_post')


@dataclass(frozen=True)
class RegretConfig:
    """Repeated play under a drifting population.

    ``alpha_t = alpha * (1 + amplitude * sin(2 pi t / period))``, further
    multiplied by ``jump_scale`` from ``jump_time`` on.
    The dual step is ``eta0 / (t + 1) ** step_power``; ``0`` keeps it constant.
    """
    horizon: int = 10_000
    amplitude: float = 0.1
    period: int = 2000
    jump_time: Optional[int] = None
    jump_scale: float = 1.0
    eta0: Optional[float] = None
    step_power: float = 0.5
    start_at_equilibrium: bool = False

    def __post_init__(self):
        if not 0 <= self.amplitude < 1:
            raise ConfigurationError('must be in [0, 1)', key='experiment.regret.amplitude')
        if self.jump_scale <= 0:
            raise ConfigurationError('must be positive', key='experiment.regret.jump_scale')
        if not 0 <= self.step_power <= 1:
            raise ConfigurationError('must be in [0, 1]', key='experiment.regret.step_power')
        if self.jump_time is not None and not 0 <= self.jump_time < self.horizon:
            raise ConfigurationError('must fall inside the horizon', key='experiment.regret.jump_time')


@dataclass(frozen=True)
class MovieLensConfig:
    path: Optional[str] = None
    capacity: Optional[float] = None
    strict: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated scenario.

    Defaults reproduce the standard simulation setting: 20 agents with
    ``alpha ~ U(5, 20)`` and ``beta ~ U(0.5, 5)``, capacity 100,
    ``tau = 0.5``, ``g = 1`` and 1000 replications.

    Attributes
    -----------
    agents: Optional[Tuple[Tuple[:class:`float`, :class:`float`], ...]]
        An explicit ``(alpha, beta)`` population. Overrides sampling and
        :attr:`n` when set.
    mechanisms: Tuple[:class:`MechanismKind`, ...]
        Mechanisms compared by the experiments, in output order.
    flat_fee: Optional[:class:`float`]
        Posted fee of the flat contract. ``None`` calibrates it.
    n_jobs: :class:`int`
        Worker processes for replications; does not change results.
    """
    n: int = 20
    m: float = 100.0
    alpha_dist: UniformDist = UniformDist(5.0, 20.0)
    beta_dist: UniformDist = UniformDist(0.5, 5.0)
    agents: Optional[Tuple[Tuple[float, float], ...]] = None
    tau: float = 0.5
    g: float = 1.0
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    replications: int = 1000
    sweep_replications: int = 50
    master_seed: int = 0
    eps_part: float = 1e-6
    mechanisms: Tuple[MechanismKind, ...] = ALL_MECHANISMS
    flat_fee: Optional[float] = None
    tau_grid: Tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0)
    g_grid: Tuple[float, ...] = (0.0, 2.5, 5.0)
    m_grid: Tuple[float, ...] = (50.0, 75.0, 100.0, 150.0, 200.0)
    n_grid: Tuple[int, ...] = (10, 20, 50, 100)
    n_jobs: int = 1
    shock: ShockConfig = field(default_factory=ShockConfig)
    regret: RegretConfig = field(default_factory=RegretConfig)
    movielens: MovieLensConfig = field(default_factory=MovieLensConfig)

    def __post_init__(self):
        if self.n <= 0:
            raise ConfigurationError('must be positive', key='population.n')
        if self.agents is not None:
            if not self.agents:
                raise ConfigurationError('must not be empty', key='population.agents')
            object.__setattr__(self, 'n', len(self.agents))
        if self.replications <= 0:
            raise ConfigurationError('must be positive', key='experiment.replications')
        if self.sweep_replications <= 0:
            raise ConfigurationError('must be positive', key='experiment.sweep_replications')
        if self.master_seed < 0:
            raise ConfigurationError('must be non-negative', key='experiment.master_seed')
        if self.eps_part <= 0:
            raise ConfigurationError('must be positive', key='experiment.eps_part')
        if self.n_jobs == 0:
            raise ConfigurationError('must be non-zero', key='experiment.n_jobs')
        if not self.mechanisms:
            raise ConfigurationError('must not be empty', key='experiment.mechanisms')
        for key in ('tau_grid', 'g_grid', 'm_grid', 'n_grid'):
            if not getattr(self, key):
                raise ConfigurationError('must not be empty', key=f'experiment.{key}')
        if any(m <= 0 for m in self.m_grid):
            raise ConfigurationError('capacities must be positive', key='experiment.m_grid')
        if any(n <= 0 for n in self.n_grid):
            raise ConfigurationError('sizes must be positive', key='experiment.n_grid')
        try:
            self.contract
        except InvalidArgument as exc:
            raise ConfigurationError(str(exc), key='contract') from exc

    @property
    def contract(self) -> ContractParams:
        return ContractParams(self.m, self.tau, self.g)

    def fixed_population(self) -> Optional[Population]:
        if self.agents is None:
            return None
        return Population([a for a, _ in self.agents], [b for _, b in self.agents])

    def replace(self, **changes) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)


# parsing helpers

def _real(value: Any, key: str, *, minimum: Optional[float] = None, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f'expected a number, got {type(value).__name__}', key=key)
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError('must be finite', key=key)
    if positive and value <= 0:
        raise ConfigurationError(f'must be positive, not {value!r}', key=key)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f'must be at least {minimum!r}, not {value!r}', key=key)
    return value


def _int(value: Any, key: str, *, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigurationError(f'expected an integer, got {value!r}', key=key)
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigurationError(f'must be at least {minimum!r}, not {value!r}', key=key)
    return value


def _bool(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f'expected true or false, got {value!r}', key=key)
    return value


def _optional(parse, value, key, **kwargs):
    return None if value is None else parse(value, key, **kwargs)


def _section(data: Dict[str, Any], name: str, allowed) -> Dict[str, Any]:
    section = data.get(name, {})
    if section is None:
        return {}
    if not isinstance(section, dict):
        raise ConfigurationError('expected an object', key=name)
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigurationError(f'unknown keys {sorted(unknown)}', key=name)
    return section


def _grid(value: Any, key: str, parse=_real, **kwargs) -> tuple:
    if not isinstance(value, list):
        raise ConfigurationError('expected a list', key=key)
    return tuple(parse(v, f'{key}[{i}]', **kwargs) for i, v in enumerate(value))


def _int_grid(value: Any, key: str, **kwargs) -> tuple:
    return _grid(value, key, parse=_int, **kwargs)


def _dist(value: Any, key: str) -> UniformDist:
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError('expected [lo, hi]', key=key)
    lo, hi = (_real(v, key) for v in value)
    try:
        return UniformDist(lo, hi)
    except InvalidArgument as exc:
        raise ConfigurationError(str(exc), key=key) from None


def _build(cls, key: str, **kwargs):
    kwargs = {k: v for k, v in kwargs.items() if v is not MISSING}
    try:
        return cls(**kwargs)
    except ConfigurationError:
        raise
    except InvalidArgument as exc:
        raise ConfigurationError(str(exc), key=key) from None


_POPULATION_KEYS = ('n', 'alpha', 'beta', 'agents')
_CONTRACT_KEYS = ('m', 'tau', 'g')
_ALGO_KEYS = (
    'step', 'gamma', 'tol_primal', 'tol_dual', 'max_iters', 'mc_samples', 'noise_sigma', 'mu_init', 'window',
    'trace_allocations',
)
_EXPERIMENT_KEYS = (
    'replications', 'sweep_replications', 'master_seed', 'eps_part', 'mechanisms', 'flat_fee', 'tau_grid',
    'g_grid', 'm_grid', 'n_grid', 'n_jobs', 'shock', 'regret', 'movielens',
)
_SHOCK_KEYS = ('t0', 'horizon', 'tau_pre', 'tau_post', 'alpha_scale_post', 'window', 'sustain')
_REGRET_KEYS = ('horizon', 'amplitude', 'period', 'jump_time', 'jump_scale', 'eta0', 'step_power', 'start_at_equilibrium')
_MOVIELENS_KEYS = ('path', 'capacity', 'strict')


def _get(section: Dict[str, Any], key: str, parse, path: str, **kwargs):
    if key not in section:
        return MISSING
    return parse(section[key], f'{path}.{key}', **kwargs)


def _parse_agents(value: Any, key: str):
    if not isinstance(value, list):
        raise ConfigurationError('expected a list of [alpha, beta] pairs', key=key)
    agents = []
    for i, pair in enumerate(value):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigurationError('expected [alpha, beta]', key=f'{key}[{i}]')
        agents.append((_real(pair[0], f'{key}[{i}]', positive=True), _real(pair[1], f'{key}[{i}]', positive=True)))
    return tuple(agents)


def _parse_mechanisms(value: Any, key: str):
    if not isinstance(value, list):
        raise ConfigurationError('expected a list of mechanism names', key=key)
    try:
        return tuple(MechanismKind.from_value(v) for v in value)
    except InvalidArgument as exc:
        raise ConfigurationError(str(exc), key=key) from None


def _parse_algo(section: Dict[str, Any]) -> AlgoConfig:
    step = MISSING
    if 'step' in section:
        if not isinstance(section['step'], dict):
            raise ConfigurationError('expected an object', key='algo.step')
        step = schedule_from_dict(section['step'])
    return _build(
        AlgoConfig,
        'algo',
        step=step,
        gamma=_get(section, 'gamma', _real, 'algo', positive=True),
        tol_primal=_get(section, 'tol_primal', lambda v, k: _optional(_real, v, k, positive=True), 'algo'),
        tol_dual=_get(section, 'tol_dual', _real, 'algo', positive=True),
        max_iters=_get(section, 'max_iters', _int, 'algo', minimum=1),
        mc_samples=_get(section, 'mc_samples', _int, 'algo', minimum=1),
        noise_sigma=_get(section, 'noise_sigma', _real, 'algo', minimum=0.0),
        mu_init=_get(section, 'mu_init', _real, 'algo', minimum=0.0),
        window=_get(section, 'window', _int, 'algo', minimum=1),
        trace_allocations=_get(section, 'trace_allocations', _bool, 'algo'),
    )


def scenario_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    """Validate a parsed scenario document.

    Raises
    -------
    ConfigurationError
        A key is unknown, has the wrong type or violates an invariant. The
        dotted key path is available as :attr:`ConfigurationError.key`.
    """
    if not isinstance(data, dict):
        raise ConfigurationError('a scenario must be a JSON object')
    unknown = set(data) - {'population', 'contract', 'algo', 'experiment'}
    if unknown:
        raise ConfigurationError(f'unknown sections {sorted(unknown)}')

    population = _section(data, 'population', _POPULATION_KEYS)
    contract = _section(data, 'contract', _CONTRACT_KEYS)
    algo = _section(data, 'algo', _ALGO_KEYS)
    experiment = _section(data, 'experiment', _EXPERIMENT_KEYS)
    shock = _section(experiment, 'shock', _SHOCK_KEYS)
    regret = _section(experiment, 'regret', _REGRET_KEYS)
    movielens = _section(experiment, 'movielens', _MOVIELENS_KEYS)

    n_jobs = _get(experiment, 'n_jobs', _int, 'experiment')
    if n_jobs is MISSING:
        n_jobs = env_int(ENV_JOBS, 1)

    return _build(
        ScenarioConfig,
        'experiment',
        n=_get(population, 'n', _int, 'population', minimum=1),
        alpha_dist=_get(population, 'alpha', _dist, 'population'),
        beta_dist=_get(population, 'beta', _dist, 'population'),
        agents=_get(population, 'agents', lambda v, k: _optional(_parse_agents, v, k), 'population'),
        m=_get(contract, 'm', _real, 'contract', positive=True),
        tau=_get(contract, 'tau', _real, 'contract', minimum=0.0),
        g=_get(contract, 'g', _real, 'contract', minimum=0.0),
        algo=_parse_algo(algo),
        replications=_get(experiment, 'replications', _int, 'experiment', minimum=1),
        sweep_replications=_get(experiment, 'sweep_replications', _int, 'experiment', minimum=1),
        master_seed=_get(experiment, 'master_seed', _int, 'experiment', minimum=0),
        eps_part=_get(experiment, 'eps_part', _real, 'experiment', positive=True),
        mechanisms=_get(experiment, 'mechanisms', _parse_mechanisms, 'experiment'),
        flat_fee=_get(experiment, 'flat_fee', lambda v, k: _optional(_real, v, k, minimum=0.0), 'experiment'),
        tau_grid=_get(experiment, 'tau_grid', _grid, 'experiment', minimum=0.0),
        g_grid=_get(experiment, 'g_grid', _grid, 'experiment', minimum=0.0),
        m_grid=_get(experiment, 'm_grid', _grid, 'experiment', positive=True),
        n_grid=_get(experiment, 'n_grid', _int_grid, 'experiment', minimum=1),
        n_jobs=n_jobs,
        shock=_build(
            ShockConfig,
            'experiment.shock',
            t0=_get(shock, 't0', _int, 'experiment.shock', minimum=1),
            horizon=_get(shock, 'horizon', _int, 'experiment.shock', minimum=2),
            tau_pre=_get(shock, 'tau_pre', _real, 'experiment.shock', minimum=0.0),
            tau_post=_get(shock, 'tau_post', _real, 'experiment.shock', minimum=0.0),
            alpha_scale_post=_get(shock, 'alpha_scale_post', _real, 'experiment.shock', positive=True),
            window=_get(shock, 'window', _int, 'experiment.shock', minimum=1),
            sustain=_get(shock, 'sustain', _int, 'experiment.shock', minimum=1),
        ),
        regret=_build(
            RegretConfig,
            'experiment.regret',
            horizon=_get(regret, 'horizon', _int, 'experiment.regret', minimum=1),
            amplitude=_get(regret, 'amplitude', _real, 'experiment.regret', minimum=0.0),
            period=_get(regret, 'period', _int, 'experiment.regret', minimum=1),
            jump_time=_get(regret, 'jump_time', lambda v, k: _optional(_int, v, k, minimum=0), 'experiment.regret'),
            jump_scale=_get(regret, 'jump_scale', _real, 'experiment.regret', positive=True),
            eta0=_get(regret, 'eta0', lambda v, k: _optional(_real, v, k, positive=True), 'experiment.regret'),
            step_power=_get(regret, 'step_power', _real, 'experiment.regret', minimum=0.0),
            start_at_equilibrium=_get(regret, 'start_at_equilibrium', _bool, 'experiment.regret'),
        ),
        movielens=_build(
            MovieLensConfig,
            'experiment.movielens',
            path=_get(movielens, 'path', _path, 'experiment.movielens'),
            capacity=_get(movielens, 'capacity', lambda v, k: _optional(_real, v, k, positive=True), 'experiment.movielens'),
            strict=_get(movielens, 'strict', _bool, 'experiment.movielens'),
        ),
    )


def _path(value: Any, key: str) -> Optional[str]:
    if value is not None and not isinstance(value, str):
        raise ConfigurationError('expected a path string', key=key)
    return value


def scenario_to_dict(cfg: ScenarioConfig) -> Dict[str, Any]:
    """The canonical, fully populated document form of ``cfg``.

    ``scenario_from_dict(scenario_to_dict(cfg)) == cfg``.
    """
    algo = cfg.algo
    step = {'kind': 'constant', 'eta': None} if algo.step is None else algo.step.to_dict()
    return {
        'population': {
            'n': cfg.n,
            'alpha': cfg.alpha_dist.to_list(),
            'beta': cfg.beta_dist.to_list(),
            'agents': None if cfg.agents is None else [list(pair) for pair in cfg.agents],
        },
        'contract': {'m': cfg.m, 'tau': cfg.tau, 'g': cfg.g},
        'algo': {
            'step': step,
            'gamma': algo.gamma,
            'tol_primal': algo.tol_primal,
            'tol_dual': algo.tol_dual,
            'max_iters': algo.max_iters,
            'mc_samples': algo.mc_samples,
            'noise_sigma': algo.noise_sigma,
            'mu_init': algo.mu_init,
            'window': algo.window,
            'trace_allocations': algo.trace_allocations,
        },
        'experiment': {
            'replications': cfg.replications,
            'sweep_replications': cfg.sweep_replications,
            'master_seed': cfg.master_seed,
            'eps_part': cfg.eps_part,
            'mechanisms': [str(kind) for kind in cfg.mechanisms],
            'flat_fee': cfg.flat_fee,
            'tau_grid': list(cfg.tau_grid),
            'g_grid': list(cfg.g_grid),
            'm_grid': list(cfg.m_grid),
            'n_grid': list(cfg.n_grid),
            'n_jobs': cfg.n_jobs,
            'shock': dataclasses.asdict(cfg.shock),
            'regret': dataclasses.asdict(cfg.regret),
            'movielens': dataclasses.asdict(cfg.movielens),
        },
    }


def parse_scenario_config(path: str) -> ScenarioConfig:
    """Read and validate a scenario file.

    Raises
    -------
    ConfigurationError
        The file cannot be read, is not valid JSON or fails validation.
    """
    try:
        with open(path, 'r', encoding='utf-8') as fp:
            data = json.load(fp)
    except OSError as exc:
        raise ConfigurationError(f'cannot read {path}: {exc.strerror or exc}') from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f'{path}:{exc.lineno}: invalid JSON ({exc.msg})') from None

    cfg = scenario_from_dict(data)
    log.debug('Loaded scenario %s (digest %s)', path, config_digest(cfg)[:12])
    return cfg


def write_scenario_config(cfg: ScenarioConfig, path: str) -> None:
    with open(path, 'w', encoding='utf-8') as fp:
        json.dump(scenario_to_dict(cfg), fp, indent=2, sort_keys=True)
        fp.write('\n')


def config_digest(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical form, excluding ``n_jobs``."""
    data = scenario_to_dict(cfg)
    del data['experiment']['n_jobs']
    return digest(data)
