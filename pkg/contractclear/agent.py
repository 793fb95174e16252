"""Agent economic primitives.

Every agent values an allocation ``x`` through a strictly concave valuation
and pays a convex private cost for it. The contract adds a per-unit fee
``tau``, the scarcity price ``mu`` and a fixed execution fee ``g`` charged to
every participating agent, so the payoff is::

    U(x; mu) = V(x) - C(x) - (tau + mu) * x - g * 1{x > 0}

The shipped family is log-linear, ``V(x) = alpha * log(1 + x)`` and
``C(x) = beta * x``, whose interior best response has the closed form
``alpha / (beta + tau + mu) - 1``. Scalar helpers work on one
:class:`AgentParams`; :class:`Population` holds the same formulas over numpy
arrays and is what the clearing engine iterates on.
"""

from __future__ import annotations

import abc
import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgument
from .utils import require_finite, require_non_negative, require_positive

log = logging.getLogger(__name__)

__all__ = (
    'AgentParams',
    'ContractParams',
    'AgentModel',
    'LogLinearAgent',
    'Population',
    'as_population',
    'valuation',
    'cost',
    'payoff',
    'best_response',
    'proximal_best_response',
    'demand_upper_bound',
)


@dataclass(frozen=True)
class AgentParams:
    """One agent of the log-linear family.

    Attributes
    -----------
    alpha: :class:`float`
        Valuation coefficient (utility units).
    beta: :class:`float`
        Marginal private cost (utility per allocation unit).
    id: :class:`int`
        Population index.
    """
    alpha: float
    beta: float
    id: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'alpha', require_positive('alpha', self.alpha))
        object.__setattr__(self, 'beta', require_positive('beta', self.beta))
        if int(self.id) != self.id or self.id < 0:
            raise InvalidArgument(f'agent id must be a non-negative integer, not {self.id!r}')
        object.__setattr__(self, 'id', int(self.id))


@dataclass(frozen=True)
class ContractParams:
    """The contract environment shared by every agent.

    Attributes
    -----------
    capacity_m: :class:`float`
        Total capacity of the shared pool.
    fee_tau: :class:`float`
        Per-unit transaction fee.
    fee_g: :class:`float`
        Fixed execution fee charged to each participating agent.
    """
    capacity_m: float
    fee_tau: float = 0.0
    fee_g: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'capacity_m', require_positive('capacity_m', self.capacity_m))
        object.__setattr__(self, 'fee_tau', require_non_negative('fee_tau', self.fee_tau))
        object.__setattr__(self, 'fee_g', require_non_negative('fee_g', self.fee_g))

    @property
    def m(self) -> float:
        return self.capacity_m

    @property
    def tau(self) -> float:
        return self.fee_tau

    @property
    def g(self) -> float:
        return self.fee_g

    def replace(self, **changes) -> ContractParams:
        """Return a copy with the given fields changed."""
        return dataclasses.replace(self, **changes)


# array kernels shared by the scalar API and Population

def _interior_demand(alpha, beta, price):
    return np.maximum(0.0, alpha / (beta + price) - 1.0)


def _interior_proximal(alpha, beta, price, x_prev, gamma):
    # stationarity of alpha*log(1+x) - (beta+price)*x - gamma/2*(x-x_prev)^2
    # in y = 1 + x: gamma*y^2 + b*y - alpha = 0 with b below
    b = beta + price - gamma * (1.0 + x_prev)
    disc = np.sqrt(b * b + 4.0 * gamma * alpha)
    with np.errstate(divide='ignore', invalid='ignore'):
        y = np.where(b > 0, 2.0 * alpha / (b + disc), (disc - b) / (2.0 * gamma))
    return np.maximum(0.0, y - 1.0)


def _payoff(alpha, beta, tau, g, mu, x):
    return alpha * np.log1p(x) - beta * x - (tau + mu) * x - g * (x > 0)


def _gate(alpha, beta, tau, g, mu, x):
    # participation: ties at a zero payoff participate
    return np.where(_payoff(alpha, beta, tau, g, mu, x) >= 0, x, 0.0)


def _check_x(x: float, name: str = 'x') -> float:
    x = require_finite(name, x)
    if x < 0:
        raise InvalidArgument(f'{name} must be non-negative, not {x!r}')
    return x


def valuation(a: AgentParams, x: float) -> float:
    """``alpha * log(1 + x)``.

    Raises
    -------
    InvalidArgument
        ``x`` is negative.
    """
    return float(a.alpha * math.log1p(_check_x(x)))


def cost(a: AgentParams, x: float) -> float:
    """``beta * x``.

    Raises
    -------
    InvalidArgument
        ``x`` is negative.
    """
    return float(a.beta * _check_x(x))


def payoff(a: AgentParams, c: ContractParams, mu: float, x: float) -> float:
    """The agent's payoff at allocation ``x`` under scarcity price ``mu``.

    Exactly ``0`` at ``x == 0``.
    """
    x = _check_x(x)
    mu = require_non_negative('mu', mu)
    return float(_payoff(a.alpha, a.beta, c.tau, c.g, mu, x))


def best_response(a: AgentParams, c: ContractParams, mu: float) -> float:
    """The payoff-maximising demand at price ``mu``.

    The interior candidate ``max(0, alpha / (beta + tau + mu) - 1)`` is kept
    only when its payoff is non-negative; otherwise the execution fee makes
    participation unprofitable and the agent demands nothing.
    """
    mu = require_non_negative('mu', mu)
    x = _interior_demand(a.alpha, a.beta, c.tau + mu)
    return float(_gate(a.alpha, a.beta, c.tau, c.g, mu, x))


def proximal_best_response(
    a: AgentParams,
    c: ContractParams,
    mu: float,
    x_prev: float,
    gamma: float,
) -> float:
    """Maximiser of ``U(x; mu) - gamma/2 * (x - x_prev)**2`` over ``x >= 0``.

    Solved in closed form as the larger root of the stationarity quadratic,
    clamped at zero, then passed through the same participation gate as
    :func:`best_response`.

    Parameters
    -----------
    x_prev: :class:`float`
        The anchor, usually the previous iterate.
    gamma: :class:`float`
        Proximal weight. Must be positive.

    Raises
    -------
    InvalidArgument
        ``gamma`` is not positive or ``x_prev`` is negative.
    """
    mu = require_non_negative('mu', mu)
    x_prev = _check_x(x_prev, 'x_prev')
    gamma = require_positive('gamma', gamma)
    x = _interior_proximal(a.alpha, a.beta, c.tau + mu, x_prev, gamma)
    return float(_gate(a.alpha, a.beta, c.tau, c.g, mu, x))


def demand_upper_bound(a: AgentParams) -> float:
    """Demand at zero total price, ``max(0, alpha / beta - 1)``."""
    return float(max(0.0, a.alpha / a.beta - 1.0))


class AgentModel(metaclass=abc.ABCMeta):
    """An ABC for agent families with a strictly concave valuation and a
    convex cost.

    Subclasses provide the primitives and the interior solutions of the
    (proximal) first-order condition; the participation gate and payoff
    bookkeeping are shared.

    The following implement this ABC:

        * :class:`LogLinearAgent`
    """

    @abc.abstractmethod
    def value(self, x: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def cost(self, x: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def marginal_value(self, x: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def marginal_cost(self, x: float) -> float:
        raise NotImplementedError

    @abc.abstractmethod
    def interior_demand(self, price: float) -> float:
        """Root of ``V'(x) - C'(x) = price`` clamped at zero."""
        raise NotImplementedError

    @abc.abstractmethod
    def interior_proximal(self, price: float, x_prev: float, gamma: float) -> float:
        """Root of ``V'(x) - C'(x) - price - gamma * (x - x_prev) = 0`` clamped at zero."""
        raise NotImplementedError

    def payoff(self, c: ContractParams, mu: float, x: float) -> float:
        x = _check_x(x)
        if x == 0:
            return 0.0
        return self.value(x) - self.cost(x) - (c.tau + mu) * x - c.g

    def _gated(self, c: ContractParams, mu: float, x: float) -> float:
        return x if self.payoff(c, mu, x) >= 0 else 0.0

    def best_response(self, c: ContractParams, mu: float) -> float:
        mu = require_non_negative('mu', mu)
        return self._gated(c, mu, self.interior_demand(c.tau + mu))

    def proximal_best_response(self, c: ContractParams, mu: float, x_prev: float, gamma: float) -> float:
        mu = require_non_negative('mu', mu)
        x_prev = _check_x(x_prev, 'x_prev')
        gamma = require_positive('gamma', gamma)
        return self._gated(c, mu, self.interior_proximal(c.tau + mu, x_prev, gamma))

    def demand_upper_bound(self) -> float:
        return self.interior_demand(0.0)


class LogLinearAgent(AgentModel):
    """``V(x) = alpha * log(1 + x)``, ``C(x) = beta * x``.

    Parameters
    -----------
    params: :class:`AgentParams`
        The agent's coefficients.
    """

    __slots__ = ('params',)

    def __init__(self, params: AgentParams):
        self.params = params

    def __repr__(self) -> str:
        return f'<LogLinearAgent id={self.params.id} alpha={self.params.alpha!r} beta={self.params.beta!r}>'

    def value(self, x: float) -> float:
        return valuation(self.params, x)

    def cost(self, x: float) -> float:
        return cost(self.params, x)

    def marginal_value(self, x: float) -> float:
        return self.params.alpha / (1.0 + _check_x(x))

    def marginal_cost(self, x: float) -> float:
        _check_x(x)
        return self.params.beta

    def interior_demand(self, price: float) -> float:
        return float(_interior_demand(self.params.alpha, self.params.beta, price))

    def interior_proximal(self, price: float, x_prev: float, gamma: float) -> float:
        return float(_interior_proximal(self.params.alpha, self.params.beta, price, x_prev, gamma))


class Population:
    """A vectorised population of log-linear agents.

    .. container:: operations

        .. describe:: len(x)

            Returns the number of agents.

        .. describe:: iter(x)

            Yields each agent as an :class:`AgentParams`.

    Attributes
    -----------
    alpha: :class:`numpy.ndarray`
        Valuation coefficients, shape ``(n,)``.
    beta: :class:`numpy.ndarray`
        Cost coefficients, shape ``(n,)``.
    ids: :class:`numpy.ndarray`
        Integer agent ids, shape ``(n,)``.
    """

    __slots__ = ('alpha', 'beta', 'ids')

    def __init__(self, alpha: Sequence[float], beta: Sequence[float], ids: Optional[Sequence[int]] = None):
        alpha = np.array(alpha, dtype=float).reshape(-1)
        beta = np.array(beta, dtype=float).reshape(-1)
        if alpha.shape != beta.shape:
            raise InvalidArgument(f'alpha and beta lengths differ ({alpha.size} != {beta.size})')
        if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta))):
            raise InvalidArgument('alpha and beta must be finite')
        if np.any(alpha <= 0) or np.any(beta <= 0):
            raise InvalidArgument('alpha and beta must be positive')
        ids = np.arange(alpha.size) if ids is None else np.array(ids, dtype=np.int64).reshape(-1)
        if ids.shape != alpha.shape:
            raise InvalidArgument('ids length does not match the population')

        for arr in (alpha, beta, ids):
            arr.setflags(write=False)
        self.alpha = alpha
        self.beta = beta
        self.ids = ids

    @classmethod
    def from_agents(cls, agents: Iterable[AgentParams]) -> Population:
        agents = list(agents)
        return cls(
            [a.alpha for a in agents],
            [a.beta for a in agents],
            [a.id for a in agents],
        )

    def __len__(self) -> int:
        return int(self.alpha.size)

    def __iter__(self) -> Iterator[AgentParams]:
        for a, b, i in zip(self.alpha, self.beta, self.ids):
            yield AgentParams(float(a), float(b), int(i))

    def __getitem__(self, index: int) -> AgentParams:
        return AgentParams(float(self.alpha[index]), float(self.beta[index]), int(self.ids[index]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Population):
            return NotImplemented
        return (
            np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.ids, other.ids)
        )

    def __repr__(self) -> str:
        return f'<Population n={len(self)}>'

    @property
    def n(self) -> int:
        return len(self)

    @property
    def max_alpha(self) -> float:
        return float(self.alpha.max()) if len(self) else 0.0

    def agents(self) -> List[AgentParams]:
        return list(self)

    def subset(self, mask: Union[Sequence[bool], np.ndarray]) -> Population:
        mask = np.asarray(mask, dtype=bool)
        return Population(self.alpha[mask], self.beta[mask], self.ids[mask])

    def with_alpha(self, scale: Union[float, np.ndarray]) -> Population:
        """Return a copy with every ``alpha`` multiplied by ``scale``."""
        return Population(self.alpha * scale, self.beta, self.ids)

    def with_beta(self, beta: Sequence[float]) -> Population:
        return Population(self.alpha, beta, self.ids)

    def valuations(self, x: np.ndarray) -> np.ndarray:
        return self.alpha * np.log1p(x)

    def costs(self, x: np.ndarray) -> np.ndarray:
        return self.beta * x

    def payoffs(self, c: ContractParams, mu: float, x: np.ndarray) -> np.ndarray:
        return _payoff(self.alpha, self.beta, c.tau, c.g, mu, np.asarray(x, dtype=float))

    def demand_upper_bounds(self) -> np.ndarray:
        return np.maximum(0.0, self.alpha / self.beta - 1.0)

    def best_responses(self, c: ContractParams, mu: float) -> np.ndarray:
        """Vector of :func:`best_response` for every agent."""
        x = _interior_demand(self.alpha, self.beta, c.tau + mu)
        return _gate(self.alpha, self.beta, c.tau, c.g, mu, x)

    def proximal_best_responses(
        self,
        c: ContractParams,
        mu: float,
        x_prev: np.ndarray,
        gamma: float,
    ) -> np.ndarray:
        """Vector of :func:`proximal_best_response` for every agent."""
        x = _interior_proximal(self.alpha, self.beta, c.tau + mu, x_prev, gamma)
        return _gate(self.alpha, self.beta, c.tau, c.g, mu, x)


def as_population(agents: Union[Population, Iterable[AgentParams]]) -> Population:
    if isinstance(agents, Population):
        return agents
    return Population.from_agents(agents)
