"""Performance metrics for allocations.

All metrics count an agent as participating when its allocation exceeds
``eps_part`` (default ``1e-6``), so efficiency and participation agree on
who pays the execution fee.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .agent import AgentParams, ContractParams, Population, as_population
from .clearing import clear_bisection
from .errors import InvalidArgument
from .utils import require_non_negative

log = logging.getLogger(__name__)

__all__ = (
    'MetricsReport',
    'efficiency',
    'gini',
    'price_of_fairness',
    'max_efficiency',
    'participation_rate',
    'avg_cost',
    'resilience',
    'regret_terms',
    'dynamic_regret',
    'evaluate',
)

Agents = Union[Population, Iterable[AgentParams]]

EPS_PART = 1e-6
#: largest population searched exhaustively by the max-efficiency oracle
EXACT_SEARCH_LIMIT = 15


@dataclass
class MetricsReport:
    """Every metric of one allocation.

    Attributes
    -----------
    efficiency: :class:`float`
    gini: :class:`float`
    fairness_one_minus_gini: :class:`float`
    participation: :class:`float`
    avg_cost: :class:`float`
    pof: Optional[:class:`float`]
        ``None`` when undefined or not computed.
    resilience_R: Optional[:class:`float`]
    regret: Optional[:class:`float`]
    """
    efficiency: float
    gini: float
    fairness_one_minus_gini: float
    participation: float
    avg_cost: float
    pof: Optional[float] = None
    resilience_R: Optional[float] = None
    regret: Optional[float] = None

    def to_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def _as_vector(x, name: str = 'x') -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument(f'{name} must be finite')
    if np.any(x < 0):
        raise InvalidArgument(f'{name} must be non-negative')
    return x


def _matched(x, pop: Population) -> np.ndarray:
    x = _as_vector(x)
    if x.size != len(pop):
        raise InvalidArgument(f'allocation has {x.size} entries for {len(pop)} agents')
    return x


def efficiency(x, agents: Agents, c: ContractParams, *, eps_part: float = EPS_PART) -> float:
    """Total surplus net of fees and costs.

    ``sum(V_i(x_i) - C_i(x_i)) - tau * sum(x) - g * #{i : x_i > eps_part}``

    Raises
    -------
    InvalidArgument
        ``x`` is negative or its length does not match the population.
    """
    pop = as_population(agents)
    x = _matched(x, pop)
    surplus = float(np.sum(pop.valuations(x) - pop.costs(x)))
    return surplus - c.tau * float(x.sum()) - c.g * int(np.count_nonzero(x > eps_part))


def gini(x) -> float:
    """Gini index, half the mean absolute pairwise difference over the mean.

    ``0`` for an all-zero vector.

    Raises
    -------
    InvalidArgument
        ``x`` is empty or negative.
    """
    x = _as_vector(x)
    n = x.size
    if n == 0:
        raise InvalidArgument('gini of an empty allocation')
    total = x.sum()
    if total <= 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float(np.sum((2 * ranks - n - 1) * np.sort(x)) / (n * total))


def participation_rate(x, eps_part: float = EPS_PART) -> float:
    x = _as_vector(x)
    if x.size == 0:
        raise InvalidArgument('participation of an empty allocation')
    return float(np.count_nonzero(x > eps_part) / x.size)


def avg_cost(x, agents: Agents, c: ContractParams, unit_price: float, *, eps_part: float = EPS_PART) -> float:
    """Mean payment ``unit_price * x_i + g`` over participating agents.

    ``0`` when nobody participates.
    """
    unit_price = require_non_negative('unit_price', unit_price)
    x = _matched(x, as_population(agents))
    active = x > eps_part
    if not active.any():
        return 0.0
    return float(np.mean(unit_price * x[active] + c.g))


def resilience(eff_pre: float, eff_post: float) -> Optional[float]:
    """``eff_post / eff_pre``; ``None`` when ``eff_pre <= 0``."""
    if eff_pre <= 0:
        log.warning('Resilience undefined for non-positive pre-shock efficiency %.6g', eff_pre)
        return None
    return float(eff_post / eff_pre)


def _subset_efficiency(pop: Population, c: ContractParams, mask: np.ndarray, eps_part: float) -> float:
    x = np.zeros(len(pop))
    if mask.any():
        # within a fixed participant set the fee is sunk
        x[mask] = clear_bisection(pop.subset(mask), c.replace(fee_g=0.0), tol=1e-10).allocations
    return efficiency(x, pop, c, eps_part=eps_part)


def max_efficiency(agents: Agents, c: ContractParams, *, eps_part: float = EPS_PART) -> Tuple[float, bool]:
    """Highest efficiency over feasible allocations.

    Without an execution fee this is the clearing allocation. With one, the
    participant set is searched: exhaustively up to
    ``EXACT_SEARCH_LIMIT`` agents, by greedily dropping the least valuable
    participant above that.

    Returns
    --------
    Tuple[:class:`float`, :class:`bool`]
        The efficiency and whether it is exact.
    """
    pop = as_population(agents)
    n = len(pop)
    if n == 0:
        return 0.0, True
    if c.g == 0:
        return efficiency(clear_bisection(pop, c).allocations, pop, c, eps_part=eps_part), True

    candidates = np.flatnonzero(pop.demand_upper_bounds() > 0)
    if candidates.size <= EXACT_SEARCH_LIMIT:
        best = 0.0
        for size in range(1, candidates.size + 1):
            for chosen in itertools.combinations(candidates, size):
                mask = np.zeros(n, dtype=bool)
                mask[list(chosen)] = True
                best = max(best, _subset_efficiency(pop, c, mask, eps_part))
        return best, True

    mask = np.zeros(n, dtype=bool)
    mask[candidates] = True
    best = _subset_efficiency(pop, c, mask, eps_part)
    while mask.any():
        trials = []
        for i in np.flatnonzero(mask):
            trial = mask.copy()
            trial[i] = False
            trials.append((_subset_efficiency(pop, c, trial, eps_part), i))
        value, drop = max(trials)
        if value <= best:
            break
        best = value
        mask[drop] = False
    return max(best, 0.0), False


def price_of_fairness(
    agents: Agents,
    c: ContractParams,
    fair_allocation=None,
    *,
    eps_part: float = EPS_PART,
) -> Optional[float]:
    """Ratio of the maximum efficiency to the efficiency of ``fair_allocation``.

    Parameters
    -----------
    fair_allocation: Optional[array-like]
        Defaults to the equal split ``m / n``.

    Returns
    --------
    Optional[:class:`float`]
        ``None`` when the fair allocation's efficiency is not positive.

    Raises
    -------
    InvalidArgument
        The fair allocation exceeds the capacity.
    """
    pop = as_population(agents)
    if len(pop) == 0:
        raise InvalidArgument('price of fairness of an empty population')
    if fair_allocation is None:
        fair = np.full(len(pop), c.m / len(pop))
    else:
        fair = _matched(fair_allocation, pop)
    if fair.sum() > c.m * (1 + 1e-9):
        raise InvalidArgument(f'fair allocation totals {fair.sum():.6g}, above capacity {c.m:.6g}')

    denominator = efficiency(fair, pop, c, eps_part=eps_part)
    if denominator <= 0:
        log.warning('Price of fairness undefined: fair allocation efficiency is %.6g', denominator)
        return None
    best, exact = max_efficiency(pop, c, eps_part=eps_part)
    if not exact:
        log.debug('Price of fairness uses the greedy participant search for n=%s', len(pop))
    return best / denominator


def _per_round(value, T: int, name: str):
    if isinstance(value, (Population, ContractParams)):
        return [value] * T
    value = list(value)
    if value and isinstance(value[0], AgentParams):
        return [value] * T
    if len(value) != T:
        raise InvalidArgument(f'{name} has {len(value)} rounds, expected {T}')
    return value


def regret_terms(
    realized: Sequence,
    agents_per_round,
    c_per_round,
    *,
    eps_part: float = EPS_PART,
) -> np.ndarray:
    """Per-round gap ``U(x*_t) - U(x_t)`` against the bisection comparator.

    ``agents_per_round`` and ``c_per_round`` are either one value used for
    every round or a sequence aligned with ``realized``.

    Raises
    -------
    InvalidArgument
        The sequences are misaligned.
    """
    T = len(realized)
    agents_per_round = _per_round(agents_per_round, T, 'agents_per_round')
    c_per_round = _per_round(c_per_round, T, 'c_per_round')

    # rounds sharing a population object and contract share one comparator
    best: Dict[Tuple[int, ContractParams], float] = {}
    terms = np.empty(T)
    for t, (x, agents, c) in enumerate(zip(realized, agents_per_round, c_per_round)):
        key = (id(agents), c)
        if key not in best:
            best[key] = efficiency(clear_bisection(agents, c).allocations, agents, c, eps_part=eps_part)
        terms[t] = best[key] - efficiency(x, agents, c, eps_part=eps_part)
    return terms


def dynamic_regret(realized: Sequence, agents_per_round, c_per_round, *, eps_part: float = EPS_PART) -> float:
    """Cumulative :func:`regret_terms`. Terms are summed as they are."""
    return float(regret_terms(realized, agents_per_round, c_per_round, eps_part=eps_part).sum())


def evaluate(
    x,
    agents: Agents,
    c: ContractParams,
    unit_price: float,
    *,
    eps_part: float = EPS_PART,
    with_pof: bool = True,
) -> MetricsReport:
    """Collect the static metrics of one allocation into a report."""
    pop = as_population(agents)
    x = _matched(x, pop)
    g = gini(x)
    return MetricsReport(
        efficiency=efficiency(x, pop, c, eps_part=eps_part),
        gini=g,
        fairness_one_minus_gini=1.0 - g,
        participation=participation_rate(x, eps_part),
        avg_cost=avg_cost(x, pop, c, unit_price, eps_part=eps_part),
        pof=price_of_fairness(pop, c, eps_part=eps_part) if with_pof else None,
    )
