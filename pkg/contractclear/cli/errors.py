"""Errors raised while parsing and dispatching command-line invocations."""

from __future__ import annotations

from typing import Optional

from ..errors import ContractClearException

__all__ = (
    'CommandError',
    'UserInputError',
    'BadArgument',
    'CommandNotFound',
    'CommandInvokeError',
)


class CommandError(ContractClearException):
    """The base exception type for all command related errors.

    This inherits from :exc:`contractclear.ContractClearException`.

    Attributes
    -----------
    exit_status: :class:`int`
        Process exit status reported for the error.
    """
    exit_status = 2


class UserInputError(CommandError):
    """The base exception type for errors in what the user typed.

    This inherits from :exc:`CommandError`.
    """
    exit_status = 1


class BadArgument(UserInputError):
    """Exception raised when a flag value cannot be parsed or is out of range.

    This inherits from :exc:`UserInputError`.

    Attributes
    -----------
    flag: Optional[:class:`str`]
        The offending flag, if known.
    """
    def __init__(self, message: str, *, flag: Optional[str] = None):
        self.flag = flag
        super().__init__(f'{flag}: {message}' if flag else message)


class CommandNotFound(UserInputError):
    """Exception raised when no subcommand under the given name exists.

    This inherits from :exc:`UserInputError`.

    Attributes
    -----------
    name: :class:`str`
        The name that was looked up.
    """
    def __init__(self, name: str):
        self.name = name
        super().__init__(f'Command "{name}" is not found')


class CommandInvokeError(CommandError):
    """Exception raised when the command being invoked raised an exception.

    This inherits from :exc:`CommandError`.

    Attributes
    -----------
    original: :exc:`Exception`
        The original exception that was raised. You can also get this via
        the ``__cause__`` attribute.
    """
    def __init__(self, name: str, original: Exception):
        self.original = original
        super().__init__(f'Command {name} raised an exception: {original.__class__.__name__}: {original}')
