from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Any

import numpy as np

from .errors import InvalidArgument


__all__ = (
    'MISSING',
    'require_finite',
    'require_non_negative',
    'require_positive',
    'derive_rng',
    'digest',
    'format_number',
    'env_int',
    'env_path',
)

ENV_OUTPUT_DIR = 'CONTRACTCLEAR_OUTPUT_DIR'
ENV_JOBS = 'CONTRACTCLEAR_JOBS'


class _Unset:
    """Marks a configuration key that was not given.

    Falsy and unequal to everything, so a key set to ``None`` stays
    distinguishable. Compare with ``is``.
    """
    __slots__ = ()

    def __eq__(self, other: object) -> bool:
        return False

    __hash__ = object.__hash__

    def __bool__(self) -> bool:
        return False

    def __repr__(self) -> str:
        return '<unset>'

    def __reduce__(self) -> str:
        return 'MISSING'


MISSING: Any = _Unset()


def require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f'{name} must be finite, not {value!r}')
    return value


def require_non_negative(name: str, value: float) -> float:
    value = require_finite(name, value)
    if value < 0:
        raise InvalidArgument(f'{name} must be non-negative, not {value!r}')
    return value


def require_positive(name: str, value: float) -> float:
    value = require_finite(name, value)
    if value <= 0:
        raise InvalidArgument(f'{name} must be positive, not {value!r}')
    return value


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Return an independent generator for the substream ``(master_seed, *keys)``.

    The same arguments always reproduce the same stream, regardless of which
    other substreams were drawn before or in parallel.
    """
    if master_seed < 0 or any(k < 0 for k in keys):
        raise InvalidArgument('seed and substream keys must be non-negative integers')
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def digest(payload: Any) -> str:
    """SHA-256 of the canonical (sorted-key, compact) JSON form of ``payload``."""
    text = json.dumps(payload, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def format_number(value: Any) -> str:
    """Render a cell the way result files store it: 6 significant digits
    for reals, verbatim for everything else."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if value is None:
        return ''
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return format(value, '.6g')
    return str(value)


def env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgument(f'environment variable {name} must be an integer, not {raw!r}') from None


def env_path(path: str, *, env: str = ENV_OUTPUT_DIR) -> str:
    """Resolve a relative output path against ``$CONTRACTCLEAR_OUTPUT_DIR`` when set."""
    base = os.environ.get(env)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path
