"""
contractclear.cli
~~~~~~~~~~~~~~~~~

The command-line surface.

Exit status is 0 on success, 1 for usage and validation errors and 2 when
a command fails at runtime.
"""

from __future__ import annotations

import logging
import sys
from typing import Optional, Sequence

from ..errors import ContractClearException, InvalidArgument, InvalidData
from .commands import registry
from .context import Context
from .core import *
from .errors import *

log = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format=LOG_FORMAT,
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the program on ``argv`` (``sys.argv[1:]`` by default) and
    return the exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd, args = registry.parse(argv)
    except UserInputError as exc:
        if argv:
            sys.stderr.write(f'error: {exc}\n')
        registry.print_usage()
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK

    _configure_logging(getattr(args, 'verbose', False))
    ctx = Context(command=cmd, args=args, invoked_with=args.command)
    try:
        status = cmd.invoke(ctx)
    except (UserInputError, InvalidArgument, InvalidData) as exc:
        sys.stderr.write(f'error: {exc}\n')
        return EXIT_USAGE
    except CommandInvokeError as exc:
        log.debug('Command %s failed', cmd.name, exc_info=exc.original)
        sys.stderr.write(f'error: {exc}\n')
        return EXIT_RUNTIME
    except ContractClearException as exc:
        sys.stderr.write(f'error: {exc}\n')
        return EXIT_RUNTIME
    return status
