from __future__ import annotations

import argparse
import inspect
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..errors import InvalidArgument, InvalidData
from .errors import BadArgument, CommandError, CommandInvokeError, CommandNotFound

log = logging.getLogger(__name__)

__all__ = (
    'ArgumentParser',
    'Command',
    'CommandRegistry',
    'command',
    'argument',
)


class ArgumentParser(argparse.ArgumentParser):
    """An :class:`argparse.ArgumentParser` that raises instead of exiting.

    Usage errors become :exc:`BadArgument`, so the caller decides the exit
    status and where the usage text goes.
    """

    def error(self, message: str):
        raise BadArgument(message)


class Command:
    """A subcommand of the ``contractclear`` program.

    These are not created manually, instead they are created via the
    decorator or functional interface.

    Attributes
    -----------
    name: :class:`str`
        The name of the command.
    callback: Callable[[:class:`Context`], Optional[:class:`int`]]
        The function called when the command is invoked.
    help: Optional[:class:`str`]
        The long help text for the command.
    brief: Optional[:class:`str`]
        The short help text for the command.
    aliases: List[:class:`str`]
        The list of aliases the command can be invoked under.
    arguments: List[Tuple[tuple, dict]]
        ``add_argument`` calls applied to the command's parser, in
        declaration order.
    common: :class:`bool`
        Whether the shared ``--config``/``--seed``/``--out``/``--format``
        flags are added.
    """

    def __init__(self, func: Callable[..., Any], **kwargs):
        if not callable(func):
            raise TypeError('Command callback must be callable.')

        name = kwargs.get('name') or func.__name__.rstrip('_')
        if not isinstance(name, str):
            raise TypeError('Command name must be a string.')
        self.name: str = name
        self.callback = func

        help_doc = kwargs.get('help')
        if help_doc is not None:
            help_doc = inspect.cleandoc(help_doc)
        else:
            help_doc = inspect.getdoc(func)
        self.help: Optional[str] = help_doc
        self.brief: Optional[str] = kwargs.get('brief')
        self.common: bool = kwargs.get('common', True)

        aliases = kwargs.get('aliases', [])
        if isinstance(aliases, str):
            aliases = [aliases]
        elif not isinstance(aliases, (list, tuple)):
            raise TypeError('Command aliases must be a list or a tuple of strings.')
        self.aliases: List[str] = list(aliases)

        try:
            arguments = list(func.__command_arguments__)
            arguments.reverse()
        except AttributeError:
            arguments = list(kwargs.get('arguments', []))
        self.arguments: List[Tuple[tuple, dict]] = arguments

    def __repr__(self) -> str:
        return f'<Command name={self.name!r}>'

    @property
    def short_doc(self) -> str:
        """:class:`str`: The brief, or the first line of the help text."""
        if self.brief is not None:
            return self.brief
        if self.help is not None:
            return self.help.split('\n', 1)[0]
        return ''

    def configure(self, parser: argparse.ArgumentParser) -> None:
        for args, kwargs in self.arguments:
            parser.add_argument(*args, **kwargs)

    def invoke(self, ctx) -> int:
        try:
            status = self.callback(ctx)
        except (CommandError, InvalidArgument, InvalidData):
            raise
        except Exception as exc:
            raise CommandInvokeError(self.name, exc) from exc
        return 0 if status is None else int(status)


def command(name: Optional[str] = None, cls=Command, **attrs):
    """A decorator that transforms a function into a :class:`Command`.

    The help text is taken from the docstring unless ``help`` is given.

    Parameters
    -----------
    name: :class:`str`
        The name to create the command with. By default this uses the
        function name with trailing underscores stripped.
    cls
        The class to construct with. By default this is :class:`Command`.
    attrs
        Keyword arguments to pass into the construction of ``cls``.

    Raises
    -------
    TypeError
        If the function is already a command.
    """

    def decorator(func):
        if isinstance(func, Command):
            raise TypeError('Function is already a command.')
        attrs['name'] = attrs.get('name', name)
        return cls(func, **attrs)

    return decorator


def argument(*args, **kwargs):
    """Declare a flag of the decorated command, as for
    :meth:`argparse.ArgumentParser.add_argument`.

    Must be applied below :func:`command`.
    """

    def decorator(func):
        if isinstance(func, Command):
            func.arguments.append((args, kwargs))
        else:
            if not hasattr(func, '__command_arguments__'):
                func.__command_arguments__ = []
            func.__command_arguments__.append((args, kwargs))
        return func

    return decorator


class CommandRegistry:
    """Holds the subcommands of a program and builds its parser.

    Attributes
    -----------
    prog: :class:`str`
        Program name shown in usage text.
    all_commands: Dict[:class:`str`, :class:`Command`]
        A mapping of command name and aliases to :class:`Command` objects.
    """

    def __init__(self, prog: str, description: Optional[str] = None):
        self.prog = prog
        self.description = description
        self.all_commands: Dict[str, Command] = {}
        self._common: List[Tuple[tuple, dict]] = []

    @property
    def commands(self) -> List[Command]:
        """List[:class:`Command`]: Unique registered commands, in registration order."""
        seen: List[Command] = []
        for cmd in self.all_commands.values():
            if cmd not in seen:
                seen.append(cmd)
        return seen

    def add_common_argument(self, *args, **kwargs) -> None:
        """Declare a flag accepted by every command that takes common flags."""
        self._common.append((args, kwargs))

    def add_command(self, command: Command) -> None:
        """Adds a :class:`Command` into the registry.

        Raises
        -------
        TypeError
            The command is not a :class:`Command`.
        ValueError
            The command or one of its aliases is already registered.
        """
        if not isinstance(command, Command):
            raise TypeError('The command passed must be a subclass of Command')
        for key in (command.name, *command.aliases):
            if key in self.all_commands:
                raise ValueError(f'Command {key!r} is already registered.')
        self.all_commands[command.name] = command
        for alias in command.aliases:
            self.all_commands[alias] = command

    def remove_command(self, name: str) -> Optional[Command]:
        command = self.all_commands.pop(name, None)
        if command is None:
            return None
        if name in command.aliases:
            # an alias was removed, the command stays
            return command
        for alias in command.aliases:
            self.all_commands.pop(alias, None)
        return command

    def get_command(self, name: str) -> Optional[Command]:
        return self.all_commands.get(name)

    def command(self, *args, **kwargs):
        """A shortcut decorator that invokes :func:`command` and adds the
        result to the registry via :meth:`add_command`."""

        def decorator(func):
            result = command(*args, **kwargs)(func)
            self.add_command(result)
            return result

        return decorator

    def build_parser(self) -> ArgumentParser:
        common = ArgumentParser(add_help=False)
        for args, kwargs in self._common:
            common.add_argument(*args, **kwargs)

        parser = ArgumentParser(prog=self.prog, description=self.description)
        subparsers = parser.add_subparsers(dest='command', metavar='<command>', parser_class=ArgumentParser)
        for cmd in self.commands:
            sub = subparsers.add_parser(
                cmd.name,
                aliases=cmd.aliases,
                help=cmd.short_doc,
                description=cmd.help,
                parents=[common] if cmd.common else [],
            )
            cmd.configure(sub)
        return parser

    def parse(self, argv: Sequence[str]) -> Tuple[Command, argparse.Namespace]:
        """Resolve ``argv`` to a command and its parsed flags.

        Raises
        -------
        CommandNotFound
            The first argument is not a registered command.
        BadArgument
            No command was given, or the flags do not parse.
        """
        argv = list(argv)
        if not argv:
            raise BadArgument('a command is required')
        if not argv[0].startswith('-') and argv[0] not in self.all_commands:
            raise CommandNotFound(argv[0])
        namespace = self.build_parser().parse_args(argv)
        cmd = self.get_command(namespace.command)
        if cmd is None:
            raise BadArgument('a command is required')
        return cmd, namespace

    def usage(self) -> str:
        return self.build_parser().format_usage()

    def print_usage(self, file=None) -> None:
        (file or sys.stderr).write(self.usage())
