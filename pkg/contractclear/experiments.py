"""Seeded experiment protocols.

Every replication ``i`` draws its population from the substream
``(master_seed, i)``, so all mechanisms and all grid points of one
experiment see the same populations, and parallel runs aggregate to the
same numbers as serial ones. Replications run through :mod:`joblib` and are
reduced in index order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from . import __version__
from .agent import ContractParams, Population
from .clearing import (
    AlgoConfig,
    clear_bisection,
    clear_decentralized,
    coerce_rng,
    dual_update,
    estimate_demand,
    lipschitz_bound,
)
from .config import ScenarioConfig, ShockConfig, config_digest
from .enums import MechanismType
from .errors import ConfigurationError, InvalidArgument
from .mechanisms import MechanismKind, allocate, calibrate_flat_fee, ration
from .metrics import efficiency, evaluate, gini, participation_rate, price_of_fairness, regret_terms, resilience
from .movielens import draw_user_beta
from .results import ResultTable
from .schedule import ConstantStep, DiminishingStep
from .utils import derive_rng

log = logging.getLogger(__name__)

__all__ = (
    'FeeSchedule',
    'SweepRow',
    'SweepResult',
    'ShockResult',
    'RegretResult',
    'StaticsResult',
    'ConvergenceSeries',
    'sample_population',
    'scenario_flat_fee',
    'run_replications',
    'compare_mechanisms',
    'fee_sweep',
    'sensitivity_grid',
    'scaling_sweep',
    'shock_run',
    'regret_experiment',
    'capacity_statics',
    'convergence_series',
    'movielens_comparison',
)


# stable substream keys so adding a mechanism never reshuffles another's noise
_MECHANISM_STREAM = {t: i for i, t in enumerate(MechanismType, start=1)}


@dataclass(frozen=True)
class FeeSchedule:
    """Per-round contract terms for repeated play.

    Attributes
    -----------
    horizon_T: :class:`int`
        Number of rounds.
    tau_path: :class:`numpy.ndarray`
        ``tau`` for every round.
    g_path: :class:`numpy.ndarray`
        ``g`` for every round.
    alpha_scale: :class:`numpy.ndarray`
        Multiplier applied to every ``alpha`` in each round.
    shock_time: Optional[:class:`int`]
        The round the shock hits, if any.
    """
    horizon_T: int
    tau_path: np.ndarray
    g_path: np.ndarray
    alpha_scale: np.ndarray
    shock_time: Optional[int] = None

    def __post_init__(self):
        if self.horizon_T <= 0:
            raise InvalidArgument('horizon must be positive')
        for name in ('tau_path', 'g_path', 'alpha_scale'):
            path = np.asarray(getattr(self, name), dtype=float)
            if path.shape != (self.horizon_T,):
                raise InvalidArgument(f'{name} must define every round in [0, {self.horizon_T})')
            object.__setattr__(self, name, path)
        if np.any(self.tau_path < 0) or np.any(self.g_path < 0) or np.any(self.alpha_scale <= 0):
            raise InvalidArgument('fees must be non-negative and alpha scales positive')
        if self.shock_time is not None and not 0 < self.shock_time < self.horizon_T:
            raise InvalidArgument('shock time must fall inside the horizon')

    @classmethod
    def constant(cls, horizon_T: int, tau: float, g: float) -> FeeSchedule:
        return cls(horizon_T, np.full(horizon_T, tau), np.full(horizon_T, g), np.ones(horizon_T))

    @classmethod
    def shock(
        cls,
        horizon_T: int,
        t0: int,
        tau_pre: float,
        tau_post: float,
        g: float,
        alpha_scale_post: float = 1.0,
    ) -> FeeSchedule:
        """A one-time jump of ``tau`` (and optionally of demand) at ``t0``."""
        t = np.arange(horizon_T)
        return cls(
            horizon_T,
            np.where(t < t0, tau_pre, tau_post),
            np.full(horizon_T, g),
            np.where(t < t0, 1.0, alpha_scale_post),
            shock_time=t0,
        )

    @classmethod
    def from_config(cls, shock: ShockConfig, g: float) -> FeeSchedule:
        return cls.shock(shock.horizon, shock.t0, shock.tau_pre, shock.tau_post, g, shock.alpha_scale_post)

    def contract(self, t: int, m: float) -> ContractParams:
        return ContractParams(m, float(self.tau_path[t]), float(self.g_path[t]))


@dataclass
class SweepRow:
    """One aggregated grid point.

    Attributes
    -----------
    grid: Dict[:class:`str`, Any]
        The grid coordinates, e.g. ``{'tau': 0.5}``.
    mechanism: :class:`str`
    replications: :class:`int`
    means: Dict[:class:`str`, :class:`float`]
    stds: Dict[:class:`str`, :class:`float`]
        Population standard deviations (divided by the replication count).
    extras: Dict[:class:`str`, Any]
        Row-level values such as ``nonconverged`` or gradients.
    """
    grid: Dict[str, Any]
    mechanism: str
    replications: int
    means: Dict[str, float]
    stds: Dict[str, float]
    extras: Dict[str, Any] = field(default_factory=dict)

    def mean(self, key: str) -> float:
        return self.means[key]


@dataclass
class SweepResult:
    """Rows of an experiment plus provenance."""
    rows: List[SweepRow]
    master_seed: int
    config_digest: str
    experiment: str = 'sweep'

    def __len__(self) -> int:
        return len(self.rows)

    def filter(self, mechanism: str) -> List[SweepRow]:
        return [row for row in self.rows if row.mechanism == mechanism]

    def to_table(self) -> ResultTable:
        records = []
        for row in self.rows:
            record: Dict[str, Any] = dict(row.grid)
            record['mechanism'] = row.mechanism
            record['replications'] = row.replications
            for key in row.means:
                record[f'{key}_mean'] = row.means[key]
                record[f'{key}_std'] = row.stds[key]
            record.update(row.extras)
            records.append(record)
        return ResultTable.from_records(records, metadata=_provenance(self.experiment, self.master_seed, self.config_digest))


def _provenance(experiment: str, master_seed: int, digest: str) -> Dict[str, Any]:
    return {
        'experiment': experiment,
        'config_digest': digest,
        'master_seed': master_seed,
        'version': __version__,
    }


def _aggregate(samples: Sequence[Dict[str, float]]) -> Tuple[Dict[str, float], Dict[str, float]]:
    means, stds = {}, {}
    for key in samples[0]:
        values = np.array([np.nan if s[key] is None else float(s[key]) for s in samples])
        defined = values[~np.isnan(values)]
        if defined.size == 0:
            means[key] = stds[key] = float('nan')
        else:
            means[key] = float(defined.mean())
            stds[key] = float(defined.std())
    return means, stds


def sample_population(cfg: ScenarioConfig, replication_index: int, *, n: Optional[int] = None) -> Population:
    """Draw the population of one replication.

    ``alpha`` and ``beta`` are drawn i.i.d. from the configured uniforms on
    the substream ``(master_seed, replication_index)``. A scenario with an
    explicit agent list returns that list every time.
    """
    fixed = cfg.fixed_population()
    if fixed is not None:
        return fixed
    n = cfg.n if n is None else n
    if n <= 0:
        raise InvalidArgument(f'population size must be positive, not {n!r}')
    rng = derive_rng(cfg.master_seed, replication_index)
    alpha = cfg.alpha_dist.sample(rng, n)
    beta = cfg.beta_dist.sample(rng, n)
    return Population(alpha, beta)


def scenario_flat_fee(cfg: ScenarioConfig, c: ContractParams, n: Optional[int] = None) -> float:
    """The flat contract's posted fee for a scenario.

    ``cfg.flat_fee`` when set, otherwise the clearing price of ``n``
    identical agents with the mean parameters of the scenario.
    """
    if cfg.flat_fee is not None:
        return cfg.flat_fee
    fixed = cfg.fixed_population()
    if fixed is not None:
        alpha, beta, size = fixed.alpha.mean(), fixed.beta.mean(), len(fixed)
    else:
        alpha, beta, size = cfg.alpha_dist.mean, cfg.beta_dist.mean, cfg.n if n is None else n
    fee = clear_bisection(Population(np.full(size, alpha), np.full(size, beta)), c).mu_star
    log.debug('Calibrated flat fee %.6g for tau=%s g=%s n=%s', fee, c.tau, c.g, size)
    return fee


def _resolve_kinds(cfg: ScenarioConfig, kinds: Iterable[MechanismKind], c: ContractParams, n: Optional[int]):
    resolved = []
    for kind in kinds:
        kind = MechanismKind.from_value(kind)
        if kind.type is MechanismType.flat_contract and kind.flat_fee is None:
            kind = kind.with_flat_fee(scenario_flat_fee(cfg, c, n))
        resolved.append(kind)
    return resolved


def _replicate(
    pop: Population,
    c: ContractParams,
    algo: AlgoConfig,
    kinds: Sequence[MechanismKind],
    master_seed: int,
    index: int,
    eps_part: float,
    with_pof: bool,
) -> List[Dict[str, Any]]:
    pof = price_of_fairness(pop, c, eps_part=eps_part) if with_pof else None
    samples = []
    for kind in kinds:
        rng = derive_rng(master_seed, index, _MECHANISM_STREAM[kind.type])
        allocation = allocate(kind, pop, c, algo, rng)
        report = evaluate(allocation.quantities, pop, c, allocation.unit_price, eps_part=eps_part, with_pof=False)
        sample = {
            'efficiency': report.efficiency,
            'gini': report.gini,
            'fairness': report.fairness_one_minus_gini,
            'participation': report.participation,
            'avg_cost': report.avg_cost,
            'mu': allocation.unit_price - c.tau,
            'feasible': float(allocation.feasible),
            'capacity_violation': allocation.capacity_violation,
            'converged': allocation.converged,
        }
        if with_pof:
            sample['pof'] = pof
        samples.append(sample)
    return samples


def _run_grid_point(
    cfg: ScenarioConfig,
    kinds: Sequence[MechanismKind],
    c: ContractParams,
    replications: int,
    *,
    n: Optional[int] = None,
    with_pof: bool = False,
    relative: bool = False,
    populations=None,
) -> List[List[Dict[str, Any]]]:
    """Per-replication samples, ``result[i][k]`` for replication ``i`` and
    mechanism ``k``."""
    kinds = list(kinds)
    if relative and not any(k.type is MechanismType.no_enforcement for k in kinds):
        kinds.append(MechanismKind.no_enforcement())

    if populations is None:
        def population(i):
            return sample_population(cfg, i, n=n)
    else:
        population = populations

    jobs = (
        delayed(_replicate)(population(i), c, cfg.algo, kinds, cfg.master_seed, i, cfg.eps_part, with_pof)
        for i in range(replications)
    )
    results = Parallel(n_jobs=cfg.n_jobs)(jobs)

    if relative:
        baseline = next(k for k, kind in enumerate(kinds) if kind.type is MechanismType.no_enforcement)
        undefined = 0
        for samples in results:
            base = samples[baseline]['efficiency']
            for sample in samples:
                if base > 0:
                    sample['rel_eff'] = sample['efficiency'] / base
                else:
                    sample['rel_eff'] = None
                    undefined += 1
        if undefined:
            log.warning('Relative efficiency undefined in %s samples (non-positive baseline)', undefined)
    return results


def _rows(
    results: List[List[Dict[str, Any]]],
    kinds: Sequence[MechanismKind],
    grid: Dict[str, Any],
) -> List[SweepRow]:
    rows = []
    for k, kind in enumerate(kinds):
        samples = [r[k] for r in results]
        converged = [s.pop('converged') for s in samples]
        means, stds = _aggregate(samples)
        nonconverged = len(converged) - sum(converged)
        if nonconverged:
            log.warning('%s: %s of %s replications did not converge at %s', kind, nonconverged, len(samples), grid)
        rows.append(SweepRow(dict(grid), str(kind), len(samples), means, stds, {'nonconverged': nonconverged}))
    return rows


def run_replications(
    cfg: ScenarioConfig,
    mechanism,
    *,
    contract: Optional[ContractParams] = None,
    replications: Optional[int] = None,
    grid: Optional[Dict[str, Any]] = None,
) -> SweepRow:
    """Run one mechanism over ``replications`` (default ``cfg.replications``)
    seeded populations and aggregate mean and standard deviation of every
    metric.

    Non-convergence of the equilibrium solver is counted in
    ``extras['nonconverged']``, never raised.
    """
    c = contract or cfg.contract
    R = cfg.replications if replications is None else replications
    kinds = _resolve_kinds(cfg, [mechanism], c, None)
    results = _run_grid_point(cfg, kinds, c, R)
    return _rows(results, kinds, grid or {})[0]


def compare_mechanisms(cfg: ScenarioConfig, *, replications: Optional[int] = None) -> SweepResult:
    """Every configured mechanism on common populations.

    Rows carry the price of fairness of the population and the
    per-replication efficiency relative to no enforcement (``rel_eff``).
    """
    c = cfg.contract
    R = cfg.replications if replications is None else replications
    log.info('Comparing %s mechanisms over %s replications (digest %s)', len(cfg.mechanisms), R, config_digest(cfg)[:12])
    kinds = _resolve_kinds(cfg, cfg.mechanisms, c, None)
    results = _run_grid_point(cfg, kinds, c, R, with_pof=True, relative=True)
    return SweepResult(_rows(results, kinds, {}), cfg.master_seed, config_digest(cfg), 'compare')


def fee_sweep(
    cfg: ScenarioConfig,
    mechanisms: Optional[Sequence] = None,
    *,
    tau_grid: Optional[Sequence[float]] = None,
) -> SweepResult:
    """One row per ``tau`` (and mechanism), ``cfg.sweep_replications`` each.

    Defaults to the proposed equilibrium over ``cfg.tau_grid``.
    """
    grid = cfg.tau_grid if tau_grid is None else tuple(tau_grid)
    if not grid:
        raise InvalidArgument('tau grid must not be empty')
    mechanisms = mechanisms or [MechanismKind.proposed_equilibrium()]
    log.info('Fee sweep over %s tau values (digest %s)', len(grid), config_digest(cfg)[:12])

    rows = []
    for tau in grid:
        c = ContractParams(cfg.m, tau, cfg.g)
        kinds = _resolve_kinds(cfg, mechanisms, c, None)
        results = _run_grid_point(cfg, kinds, c, cfg.sweep_replications)
        rows.extend(_rows(results, kinds, {'tau': tau}))
    return SweepResult(rows, cfg.master_seed, config_digest(cfg), 'sweep')


def _central_differences(values: np.ndarray, coords: np.ndarray) -> np.ndarray:
    out = np.full(values.shape, np.nan)
    if values.size >= 3:
        out[1:-1] = (values[2:] - values[:-2]) / (coords[2:] - coords[:-2])
    return out


def sensitivity_grid(cfg: ScenarioConfig, mechanism=None) -> SweepResult:
    """Full ``tau x g`` factorial sweep.

    Each row also carries central-difference estimates of
    ``d efficiency / d tau``, ``d fairness / d tau`` and
    ``d fairness / d g``. They are ``nan`` on the grid edges.
    """
    mechanism = mechanism or MechanismKind.proposed_equilibrium()
    taus = np.asarray(cfg.tau_grid, dtype=float)
    gs = np.asarray(cfg.g_grid, dtype=float)
    log.info('Sensitivity grid %sx%s (digest %s)', taus.size, gs.size, config_digest(cfg)[:12])

    table: Dict[Tuple[int, int], SweepRow] = {}
    for i, tau in enumerate(taus):
        for j, g in enumerate(gs):
            c = ContractParams(cfg.m, float(tau), float(g))
            kinds = _resolve_kinds(cfg, [mechanism], c, None)
            results = _run_grid_point(cfg, kinds, c, cfg.sweep_replications)
            table[i, j] = _rows(results, kinds, {'tau': float(tau), 'g': float(g)})[0]

    eff = np.array([[table[i, j].means['efficiency'] for j in range(gs.size)] for i in range(taus.size)])
    fair = np.array([[table[i, j].means['fairness'] for j in range(gs.size)] for i in range(taus.size)])
    d_eff_tau = np.column_stack([_central_differences(eff[:, j], taus) for j in range(gs.size)])
    d_fair_tau = np.column_stack([_central_differences(fair[:, j], taus) for j in range(gs.size)])
    d_fair_g = np.vstack([_central_differences(fair[i, :], gs) for i in range(taus.size)])

    rows = []
    for i in range(taus.size):
        for j in range(gs.size):
            row = table[i, j]
            row.extras.update(
                d_eff_d_tau=float(d_eff_tau[i, j]),
                d_fair_d_tau=float(d_fair_tau[i, j]),
                d_fair_d_g=float(d_fair_g[i, j]),
            )
            rows.append(row)
    return SweepResult(rows, cfg.master_seed, config_digest(cfg), 'grid')


def scaling_sweep(cfg: ScenarioConfig, *, replications: Optional[int] = None) -> SweepResult:
    """Mechanism comparison for every population size in ``cfg.n_grid``."""
    if cfg.agents is not None:
        raise ConfigurationError('scaling needs sampled populations', key='population.agents')
    R = cfg.sweep_replications if replications is None else replications
    rows = []
    for n in cfg.n_grid:
        c = cfg.contract
        kinds = _resolve_kinds(cfg, cfg.mechanisms, c, n)
        results = _run_grid_point(cfg, kinds, c, R, n=n, relative=True)
        rows.extend(_rows(results, kinds, {'n': n}))
    return SweepResult(rows, cfg.master_seed, config_digest(cfg), 'scaling')


@dataclass
class ShockResult:
    """Per-round series of a shock run and its summary.

    Attributes
    -----------
    series: Dict[:class:`str`, :class:`numpy.ndarray`]
        ``t``, ``tau``, ``mu``, ``s_hat``, ``r_primal``, ``r_kkt``,
        ``efficiency``, ``gini``, ``fairness`` and ``participation``.
    allocations: :class:`numpy.ndarray`
        ``(T, n)`` responses per round.
    summary: Dict[:class:`str`, Any]
        ``resilience`` (``None`` when undefined), window means,
        ``reconvergence_time`` (rounds after ``t0``, ``None`` if never),
        fairness ``fairness_loss`` and ``fairness_rebound``, the final price
        and the oracle price under the post-shock terms.
    """
    series: Dict[str, np.ndarray]
    allocations: np.ndarray
    summary: Dict[str, Any]
    master_seed: int = 0
    config_digest: str = ''

    def to_table(self) -> ResultTable:
        keys = list(self.series)
        rows = [[self.series[k][t] for k in keys] for t in range(len(self.series['t']))]
        metadata = _provenance('shock', self.master_seed, self.config_digest)
        metadata.update((k, v) for k, v in self.summary.items())
        return ResultTable(keys, rows, metadata)


def _reconvergence_time(r_kkt: np.ndarray, t0: int, eps: float, sustain: int) -> Optional[int]:
    ok = r_kkt <= eps
    run = 0
    for t in range(t0 + 1, ok.size):
        run = run + 1 if ok[t] else 0
        if run == sustain:
            return t - sustain + 1 - t0
    return None


def shock_run(
    cfg: ScenarioConfig,
    schedule: Optional[FeeSchedule] = None,
    *,
    replication_index: int = 0,
) -> ShockResult:
    """Play the clearing loop once per round across a fee or demand shock.

    The population is fixed for the replication; round ``t`` responds to
    the terms ``schedule.contract(t)``. Resilience compares mean efficiency
    over the last ``window`` rounds with the ``window`` rounds before the
    shock.

    Raises
    -------
    InvalidArgument
        The horizon cannot hold a window on both sides of the shock.
    """
    shock = cfg.shock
    schedule = schedule or FeeSchedule.from_config(shock, cfg.g)
    t0 = schedule.shock_time if schedule.shock_time is not None else shock.t0
    T, w = schedule.horizon_T, shock.window
    if t0 < w or T - t0 < w:
        raise InvalidArgument(f'horizon {T} too short for {w}-round windows around t0={t0}')

    base = sample_population(cfg, replication_index)
    algo = cfg.algo
    if algo.step is None:
        # valid for every round: smallest tau, largest demand scale
        L = lipschitz_bound(base.with_alpha(schedule.alpha_scale.max()), ContractParams(cfg.m, schedule.tau_path.min()))
        step = ConstantStep(1.0 / L)
    else:
        step = algo.step
    eps_p = algo.primal_tolerance(cfg.m)
    rng = coerce_rng(derive_rng(cfg.master_seed, replication_index, 0))

    n = len(base)
    x = np.zeros(n)
    mu = algo.mu_init
    pop, scale = base, 1.0
    keys = ('t', 'tau', 'mu', 's_hat', 'r_primal', 'r_kkt', 'efficiency', 'gini', 'fairness', 'participation')
    series = {k: np.zeros(T) for k in keys}
    allocations = np.zeros((T, n))

    for t in range(T):
        if schedule.alpha_scale[t] != scale:
            scale = float(schedule.alpha_scale[t])
            pop = base.with_alpha(scale)
        c = schedule.contract(t, cfg.m)
        x = pop.proximal_best_responses(c, mu, x, algo.gamma)
        s_hat = estimate_demand(x, algo, rng)
        mu_next = dual_update(mu, step.step(t), s_hat, cfg.m)
        r_p = abs(s_hat - cfg.m)
        g_t = gini(x)

        series['t'][t] = t
        series['tau'][t] = c.tau
        series['mu'][t] = mu
        series['s_hat'][t] = s_hat
        series['r_primal'][t] = r_p
        series['r_kkt'][t] = r_p if mu_next > 0 else max(0.0, s_hat - cfg.m)
        series['efficiency'][t] = efficiency(x, pop, c, eps_part=cfg.eps_part)
        series['gini'][t] = g_t
        series['fairness'][t] = 1.0 - g_t
        series['participation'][t] = participation_rate(x, cfg.eps_part)
        allocations[t] = x
        mu = mu_next

    eff_pre = float(series['efficiency'][t0 - w:t0].mean())
    eff_post = float(series['efficiency'][-w:].mean())
    fair_pre = float(series['fairness'][t0 - w:t0].mean())
    fair_post = float(series['fairness'][-w:].mean())
    fair_t0 = float(series['fairness'][t0])
    oracle = clear_bisection(pop, schedule.contract(T - 1, cfg.m))
    reconvergence = _reconvergence_time(series['r_kkt'], t0, eps_p, shock.sustain)
    if reconvergence is None:
        log.warning('No re-convergence within %s rounds after the shock', T - t0)

    summary = {
        'resilience': resilience(eff_pre, eff_post),
        'efficiency_pre': eff_pre,
        'efficiency_post': eff_post,
        'fairness_pre': fair_pre,
        'fairness_post': fair_post,
        'fairness_loss': fair_pre - fair_t0,
        'fairness_rebound': fair_post - fair_t0,
        'reconvergence_time': reconvergence,
        'mu_final': float(mu),
        'mu_oracle_post': oracle.mu_star,
        't0': t0,
    }
    return ShockResult(series, allocations, summary, cfg.master_seed, config_digest(cfg))


@dataclass
class RegretResult:
    """Cumulative dynamic regret of repeated play.

    Attributes
    -----------
    terms: :class:`numpy.ndarray`
        Per-round regret.
    cumulative: :class:`numpy.ndarray`
        ``cumulative[T - 1]`` is the regret after ``T`` rounds.
    slope: Optional[:class:`float`]
        Least-squares slope of ``log regret`` on ``log T`` over
        ``T in [100, horizon]``. ``None`` without enough positive points.
    """
    terms: np.ndarray
    cumulative: np.ndarray
    slope: Optional[float]
    master_seed: int = 0
    config_digest: str = ''

    def at(self, T: int) -> float:
        return float(self.cumulative[T - 1])

    def to_table(self) -> ResultTable:
        T = np.arange(1, self.cumulative.size + 1)
        metadata = _provenance('regret', self.master_seed, self.config_digest)
        metadata['slope'] = self.slope
        return ResultTable(['T', 'term', 'cumulative'], np.column_stack((T, self.terms, self.cumulative)).tolist(), metadata)


def fit_loglog_slope(cumulative: np.ndarray, lo: int = 100, hi: Optional[int] = None, points: int = 50) -> Optional[float]:
    hi = cumulative.size if hi is None else min(hi, cumulative.size)
    if hi <= lo:
        return None
    T = np.unique(np.geomspace(lo, hi, points).astype(int))
    values = cumulative[T - 1]
    positive = values > 0
    if positive.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(T[positive]), np.log(values[positive]), 1)
    return float(slope)


def _drift_scales(cfg: ScenarioConfig) -> np.ndarray:
    r = cfg.regret
    t = np.arange(r.horizon)
    scales = 1.0 + r.amplitude * np.sin(2.0 * math.pi * t / r.period)
    if r.jump_time is not None:
        scales = np.where(t >= r.jump_time, scales * r.jump_scale, scales)
    return scales


def regret_experiment(cfg: ScenarioConfig, *, replication_index: int = 0) -> RegretResult:
    """Repeated play against per-round optimal allocations under drift.

    Every ``alpha`` follows ``1 + amplitude * sin(2 pi t / period)`` (times
    ``jump_scale`` after ``jump_time``). The price moves with steps
    ``eta0 / (t + 1) ** step_power``; demands above capacity are rationed
    before they are scored against the bisection comparator of the round.

    A decaying step lags a persistent drift more every period, so the
    cumulative regret of the default run grows faster than linearly. A
    constant step (``step_power = 0``) tracks it.
    """
    r = cfg.regret
    c = cfg.contract
    base = sample_population(cfg, replication_index)
    scales = _drift_scales(cfg)

    eta0 = r.eta0
    if eta0 is None:
        eta0 = 1.0 / lipschitz_bound(base.with_alpha(scales.max()), c)
    step = ConstantStep(eta0) if r.step_power == 0 else DiminishingStep(eta0, r.step_power)
    algo = cfg.algo
    rng = coerce_rng(derive_rng(cfg.master_seed, replication_index, 0))

    n = len(base)
    x, mu = np.zeros(n), algo.mu_init
    if r.start_at_equilibrium:
        start = clear_bisection(base.with_alpha(scales[0]), c)
        x, mu = start.allocations.copy(), start.mu_star

    cache: Dict[float, Population] = {}
    realized, rounds = [], []
    for t in range(r.horizon):
        scale = float(scales[t])
        if scale not in cache:
            cache[scale] = base.with_alpha(scale)
        pop = cache[scale]
        x = pop.proximal_best_responses(c, mu, x, algo.gamma)
        realized.append(ration(x, c.m))
        rounds.append(pop)
        mu = dual_update(mu, step.step(t), estimate_demand(x, algo, rng), c.m)

    terms = regret_terms(realized, rounds, c, eps_part=cfg.eps_part)
    cumulative = np.cumsum(terms)
    if np.any(cumulative < -1e-6 * np.arange(1, r.horizon + 1)):
        log.warning('Cumulative regret went negative; the comparator is not optimal for g=%s', c.g)
    return RegretResult(terms, cumulative, fit_loglog_slope(cumulative), cfg.master_seed, config_digest(cfg))


@dataclass
class StaticsResult:
    """Oracle clearing price per capacity."""
    capacities: np.ndarray
    prices: np.ndarray
    monotone: bool
    master_seed: int = 0
    config_digest: str = ''

    def to_table(self) -> ResultTable:
        metadata = _provenance('statics', self.master_seed, self.config_digest)
        metadata['monotone'] = self.monotone
        return ResultTable(['m', 'mu_star'], np.column_stack((self.capacities, self.prices)).tolist(), metadata)


def capacity_statics(
    cfg: ScenarioConfig,
    m_grid: Optional[Sequence[float]] = None,
    *,
    agents: Optional[Population] = None,
) -> StaticsResult:
    """``mu*(m)`` from the bisection oracle over an increasing capacity grid.

    ``monotone`` reports whether the prices are non-increasing and strictly
    decreasing while positive.
    """
    grid = np.asarray(cfg.m_grid if m_grid is None else m_grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise InvalidArgument('capacity grid must be increasing')
    pop = agents if agents is not None else sample_population(cfg, 0)
    prices = np.array([clear_bisection(pop, ContractParams(m, cfg.tau, cfg.g)).mu_star for m in grid])

    monotone = True
    for k in range(1, grid.size):
        if prices[k] > prices[k - 1]:
            monotone = False
        elif grid[k] > grid[k - 1] and prices[k - 1] > 0 and not prices[k] < prices[k - 1]:
            monotone = False
    if not monotone:
        log.warning('Clearing price is not monotone in capacity over %s', grid.tolist())
    return StaticsResult(grid, prices, monotone, cfg.master_seed, config_digest(cfg))


@dataclass
class ConvergenceSeries:
    """Plot-ready per-round series of one clearing run.

    Attributes
    -----------
    series: Dict[:class:`str`, :class:`numpy.ndarray`]
        ``t``, ``mu``, ``s_hat``, ``r_primal``, ``r_dual``, ``efficiency``,
        ``gini`` and one ``x_<id>`` column per agent.
    """
    series: Dict[str, np.ndarray]
    converged: bool
    mu_star: float

    def to_table(self, metadata: Optional[Dict[str, Any]] = None) -> ResultTable:
        keys = list(self.series)
        rows = np.column_stack([self.series[k] for k in keys]).tolist() if keys else []
        meta = dict(metadata or {})
        meta.update(converged=self.converged, mu_star=self.mu_star)
        return ResultTable(keys, rows, meta)


def convergence_series(
    agents,
    c: ContractParams,
    cfg: Optional[AlgoConfig] = None,
    rng_seed=0,
    *,
    eps_part: float = 1e-6,
) -> ConvergenceSeries:
    """Run the decentralized loop and derive per-round efficiency and Gini."""
    cfg = (cfg or AlgoConfig()).replace(trace_allocations=True)
    pop = agents if isinstance(agents, Population) else Population.from_agents(agents)
    solution = clear_decentralized(pop, c, cfg, rng_seed)
    trace = solution.trace

    series: Dict[str, np.ndarray] = {
        't': trace.t.astype(float),
        'mu': trace.mu,
        's_hat': trace.s_hat,
        'r_primal': trace.r_primal,
        'r_dual': trace.r_dual,
    }
    if len(trace):
        series['efficiency'] = np.array([efficiency(x, pop, c, eps_part=eps_part) for x in trace.allocations])
        series['gini'] = np.array([gini(x) for x in trace.allocations])
        for k, agent_id in enumerate(pop.ids):
            series[f'x_{agent_id}'] = trace.allocations[:, k]
    return ConvergenceSeries(series, solution.converged, solution.mu_star)


def movielens_comparison(
    users: Population,
    cfg: ScenarioConfig,
    *,
    capacity: Optional[float] = None,
    replications: Optional[int] = None,
) -> SweepResult:
    """All mechanisms on a ratings-derived population.

    ``alpha`` is fixed per user. Replication ``i`` draws every ``beta`` with
    :func:`~contractclear.draw_user_beta`, so replication ``0`` is exactly
    the population :func:`~contractclear.load_movielens` returns for the
    same seed. The capacity defaults to ``n / 5`` and the flat fee, unless
    configured, is calibrated once on ``users``.
    """
    n = len(users)
    if n == 0:
        raise InvalidArgument('no users to compare')
    m = capacity or cfg.movielens.capacity or n / 5.0
    c = ContractParams(m, cfg.tau, cfg.g)
    R = cfg.sweep_replications if replications is None else replications

    def population(i: int) -> Population:
        return Population(users.alpha, draw_user_beta(users.ids, cfg.beta_dist, cfg.master_seed, i), users.ids)

    kinds = []
    for kind in cfg.mechanisms:
        kind = MechanismKind.from_value(kind)
        if kind.type is MechanismType.flat_contract and kind.flat_fee is None:
            fee = cfg.flat_fee if cfg.flat_fee is not None else calibrate_flat_fee(users, c)
            kind = kind.with_flat_fee(fee)
        kinds.append(kind)

    log.info('MovieLens comparison: %s users, capacity %.6g, %s replications', n, m, R)
    results = _run_grid_point(cfg, kinds, c, R, relative=True, populations=population)
    return SweepResult(_rows(results, kinds, {'n': n, 'm': m}), cfg.master_seed, config_digest(cfg), 'movielens')
