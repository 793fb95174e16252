from __future__ import annotations

import argparse
import logging
import sys
from typing import IO, TYPE_CHECKING, Optional

from ..agent import Population
from ..config import ScenarioConfig, parse_scenario_config, scenario_from_dict
from ..enums import ResultFormat
from ..experiments import sample_population
from ..results import ResultTable, render_results, write_results
from ..utils import format_number

if TYPE_CHECKING:
    from .core import Command

log = logging.getLogger(__name__)

__all__ = ('Context',)


class Context:
    """Represents the invocation of one command.

    Attributes
    -----------
    command: :class:`Command`
        The command being invoked.
    args: :class:`argparse.Namespace`
        The parsed flags.
    invoked_with: Optional[:class:`str`]
        The name or alias the command was invoked under.
    stdout: IO[:class:`str`]
        Where summaries and tables without ``--out`` are printed.
    """

    def __init__(self, **attrs):
        self.command: Command = attrs.pop('command')
        self.args: argparse.Namespace = attrs.pop('args')
        self.invoked_with: Optional[str] = attrs.pop('invoked_with', None)
        self.stdout: IO[str] = attrs.pop('stdout', None) or sys.stdout
        self._config: Optional[ScenarioConfig] = None

    def __repr__(self) -> str:
        return f'<Context command={self.command!r}>'

    def flag(self, name: str, default=None):
        return getattr(self.args, name, default)

    @property
    def config(self) -> ScenarioConfig:
        """:class:`ScenarioConfig`: The scenario of ``--config`` (defaults
        without it) with ``--seed`` and ``--jobs`` applied."""
        if self._config is None:
            path = self.flag('config')
            cfg = parse_scenario_config(path) if path else scenario_from_dict({})
            changes = {}
            if self.flag('seed') is not None:
                changes['master_seed'] = self.flag('seed')
            if self.flag('jobs') is not None:
                changes['n_jobs'] = self.flag('jobs')
            self._config = cfg.replace(**changes) if changes else cfg
            log.debug('Scenario loaded from %s', path or '<defaults>')
        return self._config

    @property
    def format(self) -> Optional[ResultFormat]:
        value = self.flag('format')
        return None if value is None else ResultFormat.from_value(value)

    def population(self) -> Population:
        """The configured explicit population, else replication 0 of the sampler."""
        cfg = self.config
        fixed = cfg.fixed_population()
        return fixed if fixed is not None else sample_population(cfg, 0)

    def echo(self, key: str, value) -> None:
        self.stdout.write(f'{key}: {format_number(value)}\n')

    def emit(self, table: ResultTable) -> None:
        """Write ``table`` to ``--out`` or print it."""
        out = self.flag('out')
        if out:
            path = write_results(table, out, self.format)
            log.info('Wrote %s rows to %s', len(table), path)
        else:
            self.stdout.write(render_results(table, self.format or ResultFormat.csv))
