"""The four allocation mechanisms compared by the experiments.

Each mechanism maps a population and a contract to an :class:`Allocation`
(quantities plus a payment ledger). Only the proposed equilibrium prices
scarcity; the baselines either ignore capacity, ration it in proportion to
demand, or post a fixed administrative fee and ration what still overflows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .agent import AgentParams, ContractParams, Population, as_population
from .clearing import AlgoConfig, ClearingSolution, Seed, clear_bisection, clear_decentralized
from .enums import MechanismType
from .errors import InvalidArgument
from .utils import require_non_negative

log = logging.getLogger(__name__)

__all__ = (
    'Allocation',
    'MechanismKind',
    'allocate',
    'allocate_no_enforcement',
    'allocate_proportional',
    'allocate_flat_contract',
    'allocate_proposed',
    'calibrate_flat_fee',
    'ration',
)

Agents = Union[Population, Iterable[AgentParams]]

#: capacity overshoot, relative to m, still reported as feasible
FEASIBILITY_TOL = 1e-6


@dataclass
class Allocation:
    """The outcome of one mechanism on one population.

    Attributes
    -----------
    quantities: :class:`numpy.ndarray`
        Allocation per agent.
    unit_price: :class:`float`
        Per-unit price charged: ``tau + mu*`` for the equilibrium,
        ``tau + flat_fee`` for the flat contract, ``tau`` otherwise.
    payments: :class:`numpy.ndarray`
        ``unit_price * x_i + g`` for participants, ``0`` for the rest.
    feasible: :class:`bool`
        Whether the allocation fits the capacity.
    capacity_violation: :class:`float`
        ``max(0, sum(x) - m)``, reported as ``0`` within tolerance.
    mechanism: :class:`MechanismType`
        The mechanism that produced it.
    converged: :class:`bool`
        ``False`` only when the equilibrium solver ran out of rounds.
    solution: Optional[:class:`ClearingSolution`]
        The clearing run behind an equilibrium allocation.
    """
    quantities: np.ndarray
    unit_price: float
    payments: np.ndarray
    feasible: bool
    capacity_violation: float
    mechanism: MechanismType
    converged: bool = True
    solution: Optional[ClearingSolution] = None

    def __repr__(self) -> str:
        return (
            f'<Allocation mechanism={self.mechanism!s} total={self.total:.6g} '
            f'unit_price={self.unit_price:.6g} feasible={self.feasible}>'
        )

    @property
    def total(self) -> float:
        return float(self.quantities.sum())


class MechanismKind:
    """Represents a mechanism together with its parameters.

    There are classmethods to construct each variant, e.g.
    :meth:`flat_contract` takes the posted fee.

    .. container:: operations

        .. describe:: x == y

            Checks if two mechanisms are equal.

        .. describe:: str(x)

            Returns the mechanism's name.

    Attributes
    ------------
    type: :class:`MechanismType`
        The variant.
    flat_fee: Optional[:class:`float`]
        The posted fee of a flat contract. ``None`` asks for calibration.
    """

    __slots__ = ('type', 'flat_fee')

    def __init__(self, type: MechanismType, *, flat_fee: Optional[float] = None):
        self.type = type
        if flat_fee is not None:
            flat_fee = require_non_negative('flat_fee', flat_fee)
            if type is not MechanismType.flat_contract:
                raise InvalidArgument(f'{type} does not take a flat fee')
        self.flat_fee = flat_fee

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MechanismKind) and (self.type, self.flat_fee) == (other.type, other.flat_fee)

    def __hash__(self) -> int:
        return hash((self.type, self.flat_fee))

    def __str__(self) -> str:
        return self.type.value

    def __repr__(self) -> str:
        if self.flat_fee is None:
            return f'<MechanismKind type={self.type!s}>'
        return f'<MechanismKind type={self.type!s} flat_fee={self.flat_fee!r}>'

    @classmethod
    def no_enforcement(cls) -> MechanismKind:
        return cls(MechanismType.no_enforcement)

    @classmethod
    def proportional(cls) -> MechanismKind:
        return cls(MechanismType.proportional)

    @classmethod
    def flat_contract(cls, flat_fee: Optional[float] = None) -> MechanismKind:
        return cls(MechanismType.flat_contract, flat_fee=flat_fee)

    @classmethod
    def proposed_equilibrium(cls) -> MechanismKind:
        return cls(MechanismType.proposed_equilibrium)

    @classmethod
    def from_value(cls, value: Union[str, MechanismType, MechanismKind]) -> MechanismKind:
        """Accepts a name such as ``'proportional'`` or ``'flat'``."""
        if isinstance(value, MechanismKind):
            return value
        if not isinstance(value, MechanismType):
            try:
                value = MechanismType.from_value(value)
            except ValueError as exc:
                raise InvalidArgument(str(exc)) from None
        return cls(value)

    def with_flat_fee(self, flat_fee: float) -> MechanismKind:
        return MechanismKind(self.type, flat_fee=flat_fee)


def ration(demands: np.ndarray, m: float) -> np.ndarray:
    """Scale ``demands`` down to ``m`` in proportion to their shares when
    they overflow it."""
    total = float(demands.sum())
    if total <= m:
        return demands.copy()
    return demands * (m / total)


def _ledger(
    x: np.ndarray,
    c: ContractParams,
    unit_price: float,
    mechanism: MechanismType,
    **extra,
) -> Allocation:
    payments = unit_price * x + c.g * (x > 0)
    excess = float(x.sum()) - c.m
    violation = excess if excess > FEASIBILITY_TOL * c.m else 0.0
    return Allocation(
        quantities=x,
        unit_price=unit_price,
        payments=payments,
        feasible=violation == 0.0,
        capacity_violation=violation,
        mechanism=mechanism,
        **extra,
    )


def allocate_no_enforcement(agents: Agents, c: ContractParams) -> Allocation:
    """Unconstrained best responses at ``mu = 0``.

    Capacity is not enforced; any overflow shows up as
    :attr:`Allocation.capacity_violation`.
    """
    pop = as_population(agents)
    x = pop.best_responses(c, 0.0)
    return _ledger(x, c, c.tau, MechanismType.no_enforcement)


def allocate_proportional(agents: Agents, c: ContractParams) -> Allocation:
    """Unconstrained demands, scaled by ``m / sum(d)`` when they overflow."""
    pop = as_population(agents)
    x = ration(pop.best_responses(c, 0.0), c.m)
    return _ledger(x, c, c.tau, MechanismType.proportional)


def allocate_flat_contract(agents: Agents, c: ContractParams, flat_fee: float) -> Allocation:
    """Best responses to the posted fee ``mu = flat_fee``, rationed
    proportionally when they still overflow."""
    flat_fee = require_non_negative('flat_fee', flat_fee)
    pop = as_population(agents)
    x = ration(pop.best_responses(c, flat_fee), c.m)
    return _ledger(x, c, c.tau + flat_fee, MechanismType.flat_contract)


def allocate_proposed(
    agents: Agents,
    c: ContractParams,
    cfg: Optional[AlgoConfig] = None,
    rng_seed: Seed = 0,
) -> Allocation:
    """The contract-clearing equilibrium found by the decentralized loop.

    When the execution fee makes demand jump across the capacity the loop
    can stop above ``m``; the final responses are then rationed so the
    contract never commits more than it holds.
    """
    solution = clear_decentralized(agents, c, cfg, rng_seed)
    x = solution.allocations
    if x.sum() - c.m > FEASIBILITY_TOL * c.m:
        log.warning('Equilibrium run ended at %.6g above capacity %.6g; rationing the last responses', x.sum(), c.m)
        x = ration(x, c.m)
    return _ledger(
        x,
        c,
        c.tau + solution.mu_star,
        MechanismType.proposed_equilibrium,
        converged=solution.converged,
        solution=solution,
    )


def calibrate_flat_fee(agents: Agents, c: ContractParams) -> float:
    """The clearing price of a population of identical mean-parameter agents.

    Used as the default administrative fee of the flat contract.
    """
    pop = as_population(agents)
    if len(pop) == 0:
        return 0.0
    mean = Population(
        np.full(len(pop), pop.alpha.mean()),
        np.full(len(pop), pop.beta.mean()),
    )
    return clear_bisection(mean, c).mu_star


def allocate(
    kind: Union[MechanismKind, MechanismType, str],
    agents: Agents,
    c: ContractParams,
    cfg: Optional[AlgoConfig] = None,
    rng_seed: Seed = 0,
) -> Allocation:
    """Dispatch to the allocation rule of ``kind``.

    A flat contract without a fee is calibrated on ``agents`` with
    :func:`calibrate_flat_fee`. Non-convergence of the equilibrium solver is
    flagged on the result, never raised.
    """
    kind = MechanismKind.from_value(kind)
    pop = as_population(agents)

    if kind.type is MechanismType.no_enforcement:
        return allocate_no_enforcement(pop, c)
    if kind.type is MechanismType.proportional:
        return allocate_proportional(pop, c)
    if kind.type is MechanismType.flat_contract:
        fee = kind.flat_fee if kind.flat_fee is not None else calibrate_flat_fee(pop, c)
        return allocate_flat_contract(pop, c, fee)

    allocation = allocate_proposed(pop, c, cfg, rng_seed)
    if not allocation.converged:
        log.warning('Equilibrium allocation is from an unconverged run (%s rounds)', allocation.solution.iterations)
    return allocation
