"""Step-size schedules for the dual price update."""

from __future__ import annotations

import logging
from typing import Any, Dict, Optional

from .enums import StepKind
from .errors import ConfigurationError
from .utils import require_positive

log = logging.getLogger(__name__)

__all__ = (
    'StepSchedule',
    'ConstantStep',
    'DiminishingStep',
    'schedule_from_dict',
)


class StepSchedule:
    """Base class for step-size schedules.

    A schedule is queried once per round through :meth:`step` with the
    0-based round index and returns the step size ``eta_t`` used for that
    round's price update. Schedules hold no iteration state, so one instance
    can drive any number of runs.
    """

    kind: StepKind

    def step(self, t: int) -> float:
        raise NotImplementedError

    @property
    def is_robbins_monro(self) -> bool:
        """Whether the steps sum to infinity while their squares stay summable."""
        return False

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


class ConstantStep(StepSchedule):
    """A fixed step size.

    Parameters
    -----------
    eta: :class:`float`
        The step. Must be positive; the clearing engine additionally checks
        it against ``2 / L`` for the instance at hand.
    """

    kind = StepKind.constant

    def __init__(self, eta: float):
        self.eta = require_positive('eta', eta)

    def __repr__(self) -> str:
        return f'<ConstantStep eta={self.eta!r}>'

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ConstantStep) and other.eta == self.eta

    def step(self, t: int) -> float:
        return self.eta

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'eta': self.eta}


class DiminishingStep(StepSchedule):
    """``eta_t = eta0 / (t + 1) ** power``.

    Once instantiated, :meth:`step` returns the step for round ``t``. The
    step decays polynomially with the round index; with ``power`` in
    ``(0.5, 1]`` the sequence satisfies the Robbins-Monro conditions needed
    for convergence under zero-mean demand noise.

    Parameters
    -----------
    eta0: :class:`float`
        The first step.
    power: :class:`float`
        The decay exponent, in ``(0, 1]``.
    """

    kind = StepKind.diminishing

    def __init__(self, eta0: float, power: float = 1.0):
        self.eta0 = require_positive('eta0', eta0)
        power = float(power)
        if not 0 < power <= 1:
            raise ConfigurationError(f'power must be in (0, 1], not {power!r}', key='algo.step.power')
        self.power = power

    def __repr__(self) -> str:
        return f'<DiminishingStep eta0={self.eta0!r} power={self.power!r}>'

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DiminishingStep) and (other.eta0, other.power) == (self.eta0, self.power)

    def step(self, t: int) -> float:
        return self.eta0 / (t + 1) ** self.power

    @property
    def is_robbins_monro(self) -> bool:
        return 0.5 < self.power <= 1

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind.value, 'eta0': self.eta0, 'power': self.power}


def schedule_from_dict(data: Dict[str, Any]) -> Optional[StepSchedule]:
    """Build a schedule from its ``{"kind": ...}`` mapping.

    A constant schedule with ``eta`` set to ``None`` is returned as ``None``
    so the caller can substitute the default ``1 / L``.
    """
    try:
        kind = StepKind(data.get('kind', 'constant'))
    except ValueError:
        raise ConfigurationError(f'unknown step kind {data.get("kind")!r}', key='algo.step.kind') from None

    if kind is StepKind.constant:
        unknown = set(data) - {'kind', 'eta'}
        if unknown:
            raise ConfigurationError(f'unknown keys {sorted(unknown)}', key='algo.step')
        eta = data.get('eta')
        if eta is None:
            return None
        try:
            return ConstantStep(eta)
        except Exception as exc:
            raise ConfigurationError(str(exc), key='algo.step.eta') from exc

    unknown = set(data) - {'kind', 'eta0', 'power'}
    if unknown:
        raise ConfigurationError(f'unknown keys {sorted(unknown)}', key='algo.step')
    try:
        return DiminishingStep(data.get('eta0', 0.5), data.get('power', 1.0))
    except ConfigurationError:
        raise
    except Exception as exc:
        raise ConfigurationError(str(exc), key='algo.step.eta0') from exc
