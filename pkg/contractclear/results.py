"""Result tables and their on-disk formats.

CSV files start with ``#``-prefixed ``key: value`` metadata lines, followed
by the header and the rows. JSON files hold a single document with
``schema_version``, ``metadata``, ``columns`` and ``rows``. Reals are
written with 6 significant digits; missing values are empty CSV cells or
JSON ``null``. Files are written to a temporary sibling and renamed into
place.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from .enums import ResultFormat
from .errors import InvalidArgument, InvalidData, ResultWriteError
from .utils import env_path, format_number

log = logging.getLogger(__name__)

__all__ = (
    'SCHEMA_VERSION',
    'ResultTable',
    'render_results',
    'write_results',
    'read_results',
)

SCHEMA_VERSION = 1


@dataclass
class ResultTable:
    """A rectangular table plus provenance metadata.

    Attributes
    -----------
    columns: List[:class:`str`]
        Header names.
    rows: List[List[Any]]
        Data rows, each with exactly ``len(columns)`` cells.
    metadata: Dict[:class:`str`, Any]
        Provenance such as ``config_digest`` and ``master_seed``. The write
        timestamp is added when the table is written.
    """
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        if len(set(self.columns)) != len(self.columns):
            raise InvalidArgument('column names must be unique')
        rows = self.rows
        self.rows = []
        for row in rows:
            self.add_row(row)

    def __len__(self) -> int:
        return len(self.rows)

    def add_row(self, row: Union[Sequence[Any], Mapping[str, Any]]) -> None:
        if isinstance(row, Mapping):
            row = [row.get(column) for column in self.columns]
        row = list(row)
        if len(row) != len(self.columns):
            raise InvalidArgument(f'row has {len(row)} cells, header has {len(self.columns)}')
        self.rows.append(row)

    @classmethod
    def from_records(
        cls,
        records: Iterable[Mapping[str, Any]],
        columns: Optional[Sequence[str]] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> ResultTable:
        """Build a table from dictionaries.

        Columns default to the keys in first-seen order.
        """
        records = list(records)
        if columns is None:
            columns = []
            for record in records:
                columns.extend(k for k in record if k not in columns)
        table = cls(list(columns), metadata=dict(metadata or {}))
        for record in records:
            table.add_row(record)
        return table

    def column(self, name: str) -> List[Any]:
        try:
            index = self.columns.index(name)
        except ValueError:
            raise KeyError(name) from None
        return [row[index] for row in self.rows]

    def records(self) -> List[Dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]


def _cell(value: Any) -> Any:
    # nan and None are both written as missing
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        return value
    return value


def _json_cell(value: Any) -> Any:
    value = _cell(value)
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return float(format(value, '.6g'))
    return value


def _render_csv(table: ResultTable, metadata: Dict[str, Any]) -> str:
    buffer = io.StringIO()
    for key, value in metadata.items():
        buffer.write(f'# {key}: {value}\n')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_number(_cell(v)) for v in row])
    return buffer.getvalue()


def _render_json(table: ResultTable, metadata: Dict[str, Any]) -> str:
    document = {
        'schema_version': SCHEMA_VERSION,
        'metadata': {k: _cell(v) for k, v in metadata.items() if k != 'schema_version'},
        'columns': table.columns,
        'rows': [[_json_cell(v) for v in row] for row in table.rows],
    }
    return json.dumps(document, indent=2) + '\n'


def _infer_format(path: str) -> ResultFormat:
    return ResultFormat.json if path.lower().endswith('.json') else ResultFormat.csv


def render_results(table: ResultTable, format: Union[ResultFormat, str] = ResultFormat.csv) -> str:
    """Return the text :func:`write_results` would store, stamped with the current time."""
    fmt = ResultFormat.from_value(format)
    metadata = {'schema_version': SCHEMA_VERSION}
    metadata.update((k, v) for k, v in table.metadata.items() if k not in ('schema_version', 'timestamp'))
    metadata['timestamp'] = datetime.now(timezone.utc).isoformat(timespec='seconds')
    return _render_csv(table, metadata) if fmt is ResultFormat.csv else _render_json(table, metadata)


def write_results(
    table: ResultTable,
    path: str,
    format: Union[ResultFormat, str, None] = None,
) -> str:
    """Write ``table`` atomically.

    Parameters
    -----------
    path: :class:`str`
        Destination. Relative paths are resolved against
        ``$CONTRACTCLEAR_OUTPUT_DIR`` when it is set.
    format: Optional[Union[:class:`ResultFormat`, :class:`str`]]
        ``csv`` or ``json``. Inferred from the suffix when omitted.

    Raises
    -------
    ResultWriteError
        The file could not be written.

    Returns
    --------
    :class:`str`
        The resolved path written.
    """
    path = env_path(path)
    fmt = _infer_format(path) if format is None else ResultFormat.from_value(format)
    text = render_results(table, fmt)

    directory = os.path.dirname(os.path.abspath(path))
    tmp = None
    try:
        os.makedirs(directory, exist_ok=True)
        with tempfile.NamedTemporaryFile('w', encoding='utf-8', dir=directory, delete=False, suffix='.tmp') as fp:
            tmp = fp.name
            fp.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise ResultWriteError(path, exc) from exc

    log.debug('Wrote %s rows to %s (%s)', len(table), path, fmt)
    return path


def _parse_cell(text: str) -> Any:
    if text == '':
        return None
    if text in ('true', 'false'):
        return text == 'true'
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_metadata_value(text: str) -> Any:
    value = _parse_cell(text)
    return text if isinstance(value, bool) else value


def _read_csv(path: str, text: str) -> ResultTable:
    lines = text.splitlines()
    metadata: Dict[str, Any] = {}
    start = 0
    for start, line in enumerate(lines):
        if not line.startswith('#'):
            break
        key, sep, value = line[1:].strip().partition(':')
        if not sep:
            raise InvalidData('metadata line must be "# key: value"', path=path, line=start + 1)
        metadata[key.strip()] = _parse_metadata_value(value.strip())
    else:
        start = len(lines)

    reader = csv.reader(lines[start:])
    try:
        columns = next(reader)
    except StopIteration:
        raise InvalidData('missing header row', path=path) from None

    table = ResultTable(columns, metadata=metadata)
    for offset, row in enumerate(reader, start=start + 2):
        try:
            table.add_row([_parse_cell(cell) for cell in row])
        except InvalidArgument as exc:
            raise InvalidData(str(exc), path=path, line=offset) from None
    return table


def _read_json(path: str, text: str) -> ResultTable:
    try:
        document = json.loads(text)
        columns = document['columns']
        rows = document['rows']
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidData(f'not a result document ({exc})', path=path) from None

    metadata = {'schema_version': document.get('schema_version')}
    metadata.update(document.get('metadata') or {})
    try:
        return ResultTable(columns, rows, metadata)
    except InvalidArgument as exc:
        raise InvalidData(str(exc), path=path) from None


def read_results(path: str) -> ResultTable:
    """Parse a file written by :func:`write_results`.

    Raises
    -------
    InvalidData
        The file is not a well-formed result file.
    """
    with open(path, 'r', encoding='utf-8') as fp:
        text = fp.read()
    if text.lstrip().startswith('{'):
        return _read_json(path, text)
    return _read_csv(path, text)
