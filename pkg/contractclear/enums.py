from enum import Enum


__all__ = (
    'MechanismType',
    'StepKind',
    'ResultFormat',
)


class MechanismType(Enum):
    no_enforcement = 'no_enforcement'
    proportional = 'proportional'
    flat_contract = 'flat_contract'
    proposed_equilibrium = 'proposed_equilibrium'

    # aliases
    flat = 'flat_contract'
    proposed = 'proposed_equilibrium'

    def __str__(self):
        return self.value

    def __repr__(self):
        return f'<MechanismType name={self.name!r}>'

    @classmethod
    def from_value(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            pass
        try:
            return cls[str(value).lower()]
        except KeyError:
            raise ValueError(f'Invalid mechanism: {value!r}') from None


class StepKind(Enum):
    constant = 'constant'
    diminishing = 'diminishing'

    def __str__(self):
        return self.value


class ResultFormat(Enum):
    csv = 'csv'
    json = 'json'

    def __str__(self):
        return self.value

    @classmethod
    def from_value(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f'Unsupported result format: {value!r}') from None
