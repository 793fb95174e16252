from typing import Optional


__all__ = (
    'ContractClearException',
    'InvalidArgument',
    'ConfigurationError',
    'InvalidData',
    'ResultWriteError',
)


class ContractClearException(Exception):
    """Base class for all contractclear exceptions."""
    pass


class InvalidArgument(ContractClearException):
    """Thrown when an argument to an operation is outside of its domain,
    e.g. a negative allocation, a non-positive proximal weight or an empty
    population where one is required.

    This could be considered the analogous of ``ValueError`` except
    inherited from :exc:`ContractClearException`.
    """
    pass


class ConfigurationError(InvalidArgument):
    """Thrown when a scenario or algorithm configuration fails validation.

    Attributes
    -----------
    key: Optional[:class:`str`]
        The dotted path of the offending key, e.g. ``contract.tau``.
        ``None`` when the failure is not tied to a single key.
    """
    def __init__(self, message: str, *, key: Optional[str] = None):
        self.key = key
        if key is not None:
            message = f'{key}: {message}'
        super().__init__(message)


class InvalidData(ContractClearException):
    """Exception that's raised when an input file holds malformed records.

    Attributes
    -----------
    path: :class:`str`
        The file being read.
    line: Optional[:class:`int`]
        The 1-based line number of the malformed record, if known.
    """
    def __init__(self, message: str, *, path: str, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = path if line is None else f'{path}:{line}'
        super().__init__(f'{where}: {message}')


class ResultWriteError(ContractClearException):
    """Thrown when a result file could not be written.

    Attributes
    -----------
    path: :class:`str`
        The destination that failed.
    original: :exc:`OSError`
        The underlying I/O error. Also available as ``__cause__``.
    """
    def __init__(self, path: str, original: OSError):
        self.path = path
        self.original = original
        super().__init__(f'could not write {path}: {original}')
