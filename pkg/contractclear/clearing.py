"""Contract-clearing solvers.

Two independent routes to the clearing pair ``(x*, mu*)``:

* :func:`clear_bisection` finds the root of ``S(mu) = m`` on the bracket
  ``[0, max(alpha) - tau]`` and serves as the oracle.
* :func:`clear_decentralized` runs the primal-dual loop: every agent
  submits a proximal best response to the posted price, the contract
  estimates aggregate demand and moves the price by projected dual ascent.
  :func:`clear_stochastic` is the same loop under noisy demand reports with
  diminishing steps.

When demand never reaches capacity (``S(0) <= m``) both solvers return the
slack equilibrium ``mu* = 0``.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Union

import numpy as np
from scipy import optimize

from .agent import AgentParams, ContractParams, Population, as_population
from .errors import ConfigurationError, InvalidArgument
from .schedule import ConstantStep, DiminishingStep, StepSchedule
from .utils import require_positive

log = logging.getLogger(__name__)

__all__ = (
    'AlgoConfig',
    'IterateTrace',
    'ClearingSolution',
    'RateDiagnostics',
    'aggregate_demand',
    'lipschitz_bound',
    'clear_bisection',
    'dual_update',
    'clear_decentralized',
    'clear_stochastic',
    'diagnose_rates',
)

Agents = Union[Population, Iterable[AgentParams]]
Seed = Union[int, np.random.Generator, None]

#: relative primal tolerance, multiplied by the capacity
DEFAULT_PRIMAL_TOL = 1e-6
DEFAULT_ORACLE_TOL = 1e-12
BISECTION_MAX_ITER = 200
KAPPA_FLOOR = 1e-8
FEJER_SLACK = 1e-12
SECANT_MIN_GAP = 1e-9


@dataclass(frozen=True)
class AlgoConfig:
    """Parameters of the primal-dual clearing loop.

    Attributes
    -----------
    step: Optional[:class:`~contractclear.StepSchedule`]
        Step-size schedule. ``None`` uses the constant step ``1 / L``.
    gamma: :class:`float`
        Proximal weight.
    tol_primal: Optional[:class:`float`]
        Primal tolerance in demand units. ``None`` means ``1e-6 * m``.
    tol_dual: :class:`float`
        Dual tolerance in price units.
    max_iters: :class:`int`
        Round budget.
    mc_samples: :class:`int`
        Number of noisy demand reports averaged per round.
    noise_sigma: :class:`float`
        Standard deviation of the additive report noise.
    mu_init: :class:`float`
        Starting price.
    window: :class:`int`
        Trailing window for the stochastic stopping test.
    trace_allocations: :class:`bool`
        Whether the trace keeps every round's allocation vector.
    """
    step: Optional[StepSchedule] = None
    gamma: float = 1e-6
    tol_primal: Optional[float] = None
    tol_dual: float = 1e-8
    max_iters: int = 100_000
    mc_samples: int = 1
    noise_sigma: float = 0.0
    mu_init: float = 0.0
    window: int = 50
    trace_allocations: bool = True

    def __post_init__(self):
        def check(key, ok, message):
            if not ok:
                raise ConfigurationError(message, key=f'algo.{key}')

        if self.step is not None and not isinstance(self.step, StepSchedule):
            raise ConfigurationError(f'expected a step schedule, not {self.step!r}', key='algo.step')
        check('gamma', _is_real(self.gamma) and self.gamma > 0, 'must be positive')
        if self.tol_primal is not None:
            check('tol_primal', _is_real(self.tol_primal) and self.tol_primal > 0, 'must be positive')
        check('tol_dual', _is_real(self.tol_dual) and self.tol_dual > 0, 'must be positive')
        check('max_iters', _is_int(self.max_iters) and self.max_iters > 0, 'must be a positive integer')
        check('mc_samples', _is_int(self.mc_samples) and self.mc_samples > 0, 'must be a positive integer')
        check('noise_sigma', _is_real(self.noise_sigma) and self.noise_sigma >= 0, 'must be non-negative')
        check('mu_init', _is_real(self.mu_init) and self.mu_init >= 0, 'must be non-negative')
        check('window', _is_int(self.window) and self.window > 0, 'must be a positive integer')

    def replace(self, **changes) -> AlgoConfig:
        return dataclasses.replace(self, **changes)

    def primal_tolerance(self, capacity: float) -> float:
        if self.tol_primal is not None:
            return self.tol_primal
        return DEFAULT_PRIMAL_TOL * capacity

    def resolve_step(self, lipschitz: float) -> StepSchedule:
        """Return the schedule to run with, checking constant steps
        against ``2 / L``.

        Raises
        -------
        ConfigurationError
            A constant step is not inside ``(0, 2 / L)``.
        """
        if self.step is None:
            return ConstantStep(1.0 / lipschitz)
        if isinstance(self.step, ConstantStep) and not self.step.eta < 2.0 / lipschitz:
            raise ConfigurationError(
                f'constant step {self.step.eta!r} must be below 2/L = {2.0 / lipschitz!r}',
                key='algo.step.eta',
            )
        return self.step


def _is_real(value) -> bool:
    return isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool) and np.isfinite(value)


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass
class IterateTrace:
    """Per-round record of a clearing run.

    Row ``t`` holds the price ``mu_t`` the round was played at, the demand
    estimate ``S_hat`` of the responses to it and the residuals
    ``r_primal = |S_hat - m|`` and ``r_dual = |mu_{t+1} - mu_t|``.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of recorded rounds.

    Attributes
    -----------
    t: :class:`numpy.ndarray`
    mu: :class:`numpy.ndarray`
    s_hat: :class:`numpy.ndarray`
    r_primal: :class:`numpy.ndarray`
    r_dual: :class:`numpy.ndarray`
    allocations: Optional[:class:`numpy.ndarray`]
        ``(rounds, n)`` array of responses, or ``None`` when not kept.
    mu_final: :class:`float`
        The price after the last recorded round.
    """
    t: np.ndarray
    mu: np.ndarray
    s_hat: np.ndarray
    r_primal: np.ndarray
    r_dual: np.ndarray
    allocations: Optional[np.ndarray]
    mu_final: float

    def __len__(self) -> int:
        return int(self.t.size)

    @classmethod
    def empty(cls, mu: float = 0.0) -> IterateTrace:
        z = np.zeros(0)
        return cls(np.zeros(0, dtype=np.int64), z, z, z, z, None, float(mu))

    def price_path(self) -> np.ndarray:
        """``mu_0, ..., mu_T`` including the final price."""
        return np.append(self.mu, self.mu_final)


class _TraceRecorder:
    __slots__ = ('mu', 's_hat', 'r_primal', 'r_dual', 'allocations')

    def __init__(self, keep_allocations: bool):
        self.mu: List[float] = []
        self.s_hat: List[float] = []
        self.r_primal: List[float] = []
        self.r_dual: List[float] = []
        self.allocations: Optional[List[np.ndarray]] = [] if keep_allocations else None

    def record(self, mu, x, s_hat, r_primal, r_dual):
        self.mu.append(mu)
        self.s_hat.append(s_hat)
        self.r_primal.append(r_primal)
        self.r_dual.append(r_dual)
        if self.allocations is not None:
            self.allocations.append(x)

    def build(self, mu_final: float) -> IterateTrace:
        allocations = None
        if self.allocations is not None:
            allocations = np.array(self.allocations) if self.allocations else np.zeros((0, 0))
        return IterateTrace(
            t=np.arange(len(self.mu), dtype=np.int64),
            mu=np.array(self.mu, dtype=float),
            s_hat=np.array(self.s_hat, dtype=float),
            r_primal=np.array(self.r_primal, dtype=float),
            r_dual=np.array(self.r_dual, dtype=float),
            allocations=allocations,
            mu_final=float(mu_final),
        )


@dataclass
class ClearingSolution:
    """The result of a clearing run.

    Attributes
    -----------
    allocations: :class:`numpy.ndarray`
        Allocation per agent.
    mu_star: :class:`float`
        The clearing price.
    converged: :class:`bool`
        Whether the stopping test was met within the round budget.
    iterations: :class:`int`
        Rounds played. ``0`` for the bisection oracle.
    trace: :class:`IterateTrace`
        Per-round record.
    slack: :class:`float`
        Unused capacity ``m - sum(x)`` when ``mu_star == 0``, otherwise ``0``.
    clearing_gap: :class:`float`
        ``|S(mu_star) - m|`` left by the oracle when the execution fee makes
        demand jump over the capacity. ``0`` for slack solutions.
    method: :class:`str`
        ``'bisection'``, ``'decentralized'`` or ``'stochastic'``.
    """
    allocations: np.ndarray
    mu_star: float
    converged: bool
    iterations: int
    trace: IterateTrace
    slack: float = 0.0
    clearing_gap: float = 0.0
    method: str = 'bisection'

    def __repr__(self) -> str:
        return (
            f'<ClearingSolution method={self.method!r} mu_star={self.mu_star!r} '
            f'converged={self.converged} iterations={self.iterations}>'
        )

    @property
    def total(self) -> float:
        return float(self.allocations.sum())


@dataclass
class RateDiagnostics:
    """Empirical convergence diagnostics of a trace against an oracle price.

    Attributes
    -----------
    contraction_kappa: Optional[:class:`float`]
        Largest observed ratio ``|mu_{t+1} - mu*| / |mu_t - mu*|`` over
        steps whose error exceeds ``1e-8``. ``None`` when no step
        qualifies.
    fejer_violations: :class:`int`
        Steps where the distance to ``mu*`` grew.
    ergodic_residual_curve: :class:`numpy.ndarray`
        ``(T, 2)`` array of ``(T, mean of r_primal over the first T rounds)``.
    lipschitz_L: :class:`float`
    strong_mono_alpha: :class:`float`
        Smallest secant slope ``|dS / dmu|`` between visited prices.
    """
    contraction_kappa: Optional[float]
    fejer_violations: int
    ergodic_residual_curve: np.ndarray
    lipschitz_L: float
    strong_mono_alpha: float

    @property
    def kappa_estimable(self) -> bool:
        return self.contraction_kappa is not None


def aggregate_demand(agents: Agents, c: ContractParams, mu: float) -> float:
    """``S(mu)``, the sum of best responses at price ``mu``.

    An empty population demands ``0``.
    """
    pop = as_population(agents)
    if mu < 0:
        raise InvalidArgument(f'mu must be non-negative, not {mu!r}')
    if len(pop) == 0:
        return 0.0
    return float(pop.best_responses(c, mu).sum())


def lipschitz_bound(agents: Agents, c: ContractParams) -> float:
    """Global Lipschitz constant ``sum(alpha / (beta + tau) ** 2)`` of ``S``.

    Raises
    -------
    InvalidArgument
        The population is empty.
    """
    pop = as_population(agents)
    if len(pop) == 0:
        raise InvalidArgument('cannot bound the demand slope of an empty population')
    return float(np.sum(pop.alpha / (pop.beta + c.tau) ** 2))


def dual_update(mu: float, eta: float, s_hat: float, m: float) -> float:
    """Projected dual ascent ``max(0, mu + eta * (s_hat - m))``."""
    require_positive('eta', eta)
    return max(0.0, mu + eta * (s_hat - m))


def _trivial(pop: Population, c: ContractParams, x: np.ndarray, method: str) -> ClearingSolution:
    return ClearingSolution(
        allocations=x,
        mu_star=0.0,
        converged=True,
        iterations=0,
        trace=IterateTrace.empty(),
        slack=max(0.0, c.m - float(x.sum())),
        method=method,
    )


def clear_bisection(
    agents: Agents,
    c: ContractParams,
    tol: float = DEFAULT_ORACLE_TOL,
    *,
    tol_primal: Optional[float] = None,
) -> ClearingSolution:
    """Solve ``S(mu) = m`` by bisection.

    Parameters
    -----------
    agents: Union[:class:`Population`, Iterable[:class:`AgentParams`]]
        The population.
    c: :class:`ContractParams`
        The contract.
    tol: :class:`float`
        Bracket width at which bisection stops.
    tol_primal: Optional[:class:`float`]
        Capacity overshoot accepted when demand jumps across ``m``.
        Defaults to ``1e-6 * m``.

    Returns
    --------
    :class:`ClearingSolution`
        With ``mu_star = 0`` and positive ``slack`` when demand at zero
        price fits the capacity.
    """
    pop = as_population(agents)
    tol = require_positive('tol', tol)
    eps = DEFAULT_PRIMAL_TOL * c.m if tol_primal is None else require_positive('tol_primal', tol_primal)

    if len(pop) == 0:
        return _trivial(pop, c, np.zeros(0), 'bisection')

    upper = pop.max_alpha - c.tau
    if upper <= 0:
        return _trivial(pop, c, np.zeros(len(pop)), 'bisection')

    x0 = pop.best_responses(c, 0.0)
    if x0.sum() <= c.m:
        return _trivial(pop, c, x0, 'bisection')

    def excess(mu: float) -> float:
        return float(pop.best_responses(c, mu).sum()) - c.m

    root, status = optimize.bisect(
        excess, 0.0, upper, xtol=tol, maxiter=BISECTION_MAX_ITER, full_output=True, disp=False
    )
    if not status.converged:
        log.warning('Bisection stopped after %s iterations without meeting xtol=%s', status.iterations, tol)

    # S is non-increasing, so the right neighbour is always within capacity
    best_mu, best_gap = upper, float('inf')
    for mu in (root - tol, root, root + tol):
        mu = min(max(mu, 0.0), upper)
        s = excess(mu) + c.m
        if s <= c.m + eps and abs(s - c.m) < best_gap:
            best_mu, best_gap = mu, abs(s - c.m)

    x = pop.best_responses(c, best_mu)
    if best_gap > eps:
        log.warning(
            'Demand jumps across capacity at mu=%.6g; clearing gap %.6g left by the participation fee',
            best_mu, best_gap,
        )
    log.debug('Bisection cleared at mu=%.12g after %s iterations', best_mu, status.iterations)
    return ClearingSolution(
        allocations=x,
        mu_star=float(best_mu),
        converged=True,
        iterations=0,
        trace=IterateTrace.empty(best_mu),
        slack=max(0.0, c.m - float(x.sum())) if best_mu == 0 else 0.0,
        clearing_gap=float(best_gap),
        method='bisection',
    )


def coerce_rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def estimate_demand(x: np.ndarray, cfg: AlgoConfig, rng: np.random.Generator) -> float:
    if cfg.noise_sigma == 0:
        return float(x.sum())
    # M noisy re-reports of the same responses, truncated at zero
    reports = x + rng.normal(0.0, cfg.noise_sigma, size=(cfg.mc_samples, x.size))
    return float(np.maximum(reports, 0.0).sum(axis=1).mean())


def _primal_dual(
    pop: Population,
    c: ContractParams,
    cfg: AlgoConfig,
    schedule: StepSchedule,
    rng: np.random.Generator,
    x_init: Optional[np.ndarray],
    windowed: bool,
    method: str,
) -> ClearingSolution:
    n = len(pop)
    eps_p = cfg.primal_tolerance(c.m)
    eps_d = cfg.tol_dual

    x = np.zeros(n) if x_init is None else np.asarray(x_init, dtype=float).copy()
    if x.shape != (n,) or np.any(x < 0):
        raise InvalidArgument('x_init must be a non-negative vector with one entry per agent')

    mu = float(cfg.mu_init)
    recorder = _TraceRecorder(cfg.trace_allocations)
    kkt: List[float] = []
    converged = False
    rounds = 0

    for t in range(cfg.max_iters):
        x_next = pop.proximal_best_responses(c, mu, x, cfg.gamma)
        s_hat = estimate_demand(x_next, cfg, rng)
        mu_next = dual_update(mu, schedule.step(t), s_hat, c.m)

        r_p = abs(s_hat - c.m)
        r_d = abs(mu_next - mu)
        # complementary slackness: a zero price only needs demand within capacity
        r_kkt = r_p if mu_next > 0 else max(0.0, s_hat - c.m)
        recorder.record(mu, x_next, s_hat, r_p, r_d)

        x, mu = x_next, mu_next
        rounds = t + 1

        if windowed:
            kkt.append(r_kkt)
            if rounds >= cfg.window:
                w = cfg.window
                if np.mean(kkt[-w:]) <= eps_p and np.mean(recorder.r_dual[-w:]) <= eps_d:
                    converged = True
                    break
        elif r_kkt <= eps_p and r_d <= eps_d:
            converged = True
            break

    trace = recorder.build(mu)
    if converged:
        log.debug('%s clearing converged at mu=%.12g after %s rounds', method.capitalize(), mu, rounds)
    else:
        log.warning(
            '%s clearing did not converge within %s rounds (r_primal=%.3g, r_dual=%.3g)',
            method.capitalize(), cfg.max_iters, trace.r_primal[-1], trace.r_dual[-1],
        )

    return ClearingSolution(
        allocations=x,
        mu_star=mu,
        converged=converged,
        iterations=rounds,
        trace=trace,
        slack=max(0.0, c.m - float(x.sum())) if mu == 0 else 0.0,
        method=method,
    )


def clear_decentralized(
    agents: Agents,
    c: ContractParams,
    cfg: Optional[AlgoConfig] = None,
    rng_seed: Seed = 0,
    *,
    x_init: Optional[np.ndarray] = None,
) -> ClearingSolution:
    """Run the decentralized primal-dual clearing loop.

    Every round each agent best-responds to the posted price with a
    proximal pull towards its previous demand, the contract averages
    ``mc_samples`` (possibly noisy) reports of total demand and updates the
    price by projected ascent. The loop stops once the primal residual is
    within ``tol_primal`` and the price moved by at most ``tol_dual``.

    Parameters
    -----------
    agents: Union[:class:`Population`, Iterable[:class:`AgentParams`]]
        The population.
    c: :class:`ContractParams`
        The contract.
    cfg: Optional[:class:`AlgoConfig`]
        Loop parameters. Defaults to ``AlgoConfig()``.
    rng_seed: Union[:class:`int`, :class:`numpy.random.Generator`]
        Seed of the report noise. Unused when ``noise_sigma == 0``.
    x_init: Optional[:class:`numpy.ndarray`]
        Starting allocations. Defaults to all zeros.

    Raises
    -------
    ConfigurationError
        A constant step is not inside ``(0, 2 / L)``.

    Returns
    --------
    :class:`ClearingSolution`
        ``converged`` is ``False`` when the round budget ran out; the
        trace is kept either way.
    """
    cfg = cfg or AlgoConfig()
    pop = as_population(agents)
    if len(pop) == 0:
        return _trivial(pop, c, np.zeros(0), 'decentralized')

    schedule = cfg.resolve_step(lipschitz_bound(pop, c))
    return _primal_dual(pop, c, cfg, schedule, coerce_rng(rng_seed), x_init, False, 'decentralized')


def clear_stochastic(
    agents: Agents,
    c: ContractParams,
    cfg: AlgoConfig,
    rng_seed: Seed = 0,
    *,
    x_init: Optional[np.ndarray] = None,
) -> ClearingSolution:
    """Run the clearing loop under noisy demand reports.

    Identical to :func:`clear_decentralized` except that the step schedule
    must diminish as ``eta0 / (t + 1) ** p`` with ``p`` in ``[0.5, 1]`` and
    convergence is judged on residuals averaged over the trailing
    ``cfg.window`` rounds.

    Raises
    -------
    ConfigurationError
        The schedule is not diminishing or its power is below ``0.5``.
    """
    step = cfg.step
    if not isinstance(step, DiminishingStep):
        raise ConfigurationError('stochastic clearing requires a diminishing step schedule', key='algo.step.kind')
    if step.power < 0.5:
        raise ConfigurationError(f'power must be in [0.5, 1], not {step.power!r}', key='algo.step.power')
    if not step.is_robbins_monro:
        log.warning('Step power %s is not square-summable; convergence under noise is not guaranteed', step.power)

    pop = as_population(agents)
    if len(pop) == 0:
        return _trivial(pop, c, np.zeros(0), 'stochastic')
    return _primal_dual(pop, c, cfg, step, coerce_rng(rng_seed), x_init, True, 'stochastic')


def _thin(sorted_prices: np.ndarray, gap: float) -> np.ndarray:
    kept = []
    for p in sorted_prices:
        if not kept or p - kept[-1] > gap:
            kept.append(p)
    return np.array(kept)


def diagnose_rates(
    trace: IterateTrace,
    mu_star_oracle: float,
    agents: Agents,
    c: ContractParams,
) -> RateDiagnostics:
    """Measure contraction, Fejer monotonicity and ergodic residual decay
    of ``trace`` against the oracle price.

    Raises
    -------
    InvalidArgument
        The trace is empty.
    """
    if len(trace) == 0:
        raise InvalidArgument('cannot diagnose an empty trace')
    pop = as_population(agents)
    L = lipschitz_bound(pop, c)

    errors = np.abs(trace.price_path() - mu_star_oracle)
    before, after = errors[:-1], errors[1:]

    qualifying = before > KAPPA_FLOOR
    kappa = float(np.max(after[qualifying] / before[qualifying])) if qualifying.any() else None
    violations = int(np.count_nonzero(after > before + FEJER_SLACK))

    T = np.arange(1, len(trace) + 1)
    ergodic = np.column_stack((T, np.cumsum(trace.r_primal) / T))

    prices = _thin(np.unique(trace.price_path()), SECANT_MIN_GAP)
    if prices.size >= 2:
        demand = np.array([pop.best_responses(c, p).sum() for p in prices])
        slopes = np.abs(np.diff(demand) / np.diff(prices))
        alpha = float(min(slopes.min(), L))
    else:
        alpha = 0.0

    if kappa is None:
        log.debug('Contraction factor not estimable: every error is below %s', KAPPA_FLOOR)
    return RateDiagnostics(
        contraction_kappa=kappa,
        fejer_violations=violations,
        ergodic_residual_curve=ergodic,
        lipschitz_L=L,
        strong_mono_alpha=alpha,
    )
