"""MovieLens ``u.data`` ingestion.

Each line of ``u.data`` is ``user<TAB>item<TAB>rating<TAB>timestamp``. Users
become agents: the mean rating of a user is mapped linearly onto the
``alpha`` range ``[5, 20]`` and ``beta`` is drawn from ``U(0.5, 5)`` on a
substream keyed by the user id, so a user keeps the same cost slope no
matter which other users are in the file.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from .agent import Population
from .config import UniformDist
from .errors import InvalidData
from .utils import derive_rng

log = logging.getLogger(__name__)

__all__ = (
    'MovieLensRecord',
    'IngestReport',
    'parse_line',
    'rating_to_alpha',
    'draw_user_beta',
    'load_ratings',
    'load_movielens',
)

ALPHA_LOW = 5.0
ALPHA_HIGH = 20.0
#: expected shape of the full MovieLens-100K file
FULL_DATASET_USERS = 943
FULL_DATASET_RECORDS = 100_000
# trailing substream key, keeps user streams apart from mechanism noise
_BETA_STREAM = 1


class MovieLensRecord(NamedTuple):
    user_id: int
    item_id: int
    rating: int
    timestamp: int


@dataclass
class IngestReport:
    """Summary of one ingest.

    Attributes
    -----------
    path: :class:`str`
    users: :class:`int`
        Distinct users among the accepted records.
    records: :class:`int`
        Accepted records.
    malformed: :class:`int`
        Lines skipped in lenient mode.
    malformed_lines: List[:class:`int`]
        1-based line numbers of the skipped lines.
    """
    path: str
    users: int = 0
    records: int = 0
    malformed: int = 0
    malformed_lines: List[int] = field(default_factory=list)

    @property
    def is_full_dataset(self) -> bool:
        return self.users == FULL_DATASET_USERS and self.records == FULL_DATASET_RECORDS


def parse_line(line: str) -> MovieLensRecord:
    """Parse one ``u.data`` line.

    Raises
    -------
    ValueError
        The line does not hold four positive integer fields with a rating
        between 1 and 5.
    """
    fields = line.rstrip('\r\n').split('\t')
    if len(fields) != 4:
        raise ValueError(f'expected 4 tab-separated fields, found {len(fields)}')
    try:
        user_id, item_id, rating, timestamp = (int(f) for f in fields)
    except ValueError:
        raise ValueError('fields must be integers') from None
    if user_id <= 0 or item_id <= 0:
        raise ValueError('user and item ids must be positive')
    if not 1 <= rating <= 5:
        raise ValueError(f'rating {rating} outside 1..5')
    return MovieLensRecord(user_id, item_id, rating, timestamp)


def rating_to_alpha(mean_rating):
    """Map a mean rating in ``[1, 5]`` onto ``[5, 20]``."""
    return ALPHA_LOW + (ALPHA_HIGH - ALPHA_LOW) * (np.asarray(mean_rating, dtype=float) - 1.0) / 4.0


def draw_user_beta(user_ids, dist: UniformDist, seed: int, replication_index: int = 0) -> np.ndarray:
    """Cost slopes for ``user_ids``, one substream per user and replication.

    Replication ``0`` is the population :func:`load_movielens` returns.
    """
    return np.array([dist.sample(derive_rng(seed, int(u), replication_index, _BETA_STREAM), 1)[0] for u in user_ids])


def load_ratings(path: str, *, strict: bool = False) -> Tuple[pd.DataFrame, IngestReport]:
    """Read ``u.data`` into a frame with columns ``user_id``, ``item_id``,
    ``rating`` and ``timestamp``.

    Parameters
    -----------
    strict: :class:`bool`
        Abort on the first malformed line instead of skipping it.

    Raises
    -------
    InvalidData
        The file cannot be read, or a line is malformed in strict mode.
    """
    report = IngestReport(path=path)
    records: List[MovieLensRecord] = []
    try:
        # the published file is latin-1
        with open(path, 'r', encoding='latin-1') as fp:
            for lineno, line in enumerate(fp, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(parse_line(line))
                except ValueError as exc:
                    if strict:
                        raise InvalidData(str(exc), path=path, line=lineno) from None
                    report.malformed += 1
                    report.malformed_lines.append(lineno)
                    log.warning('Skipping malformed line %s:%s (%s)', path, lineno, exc)
    except OSError as exc:
        raise InvalidData(f'cannot read ratings file ({exc.strerror or exc})', path=path) from exc

    frame = pd.DataFrame.from_records(records, columns=MovieLensRecord._fields)
    report.records = len(frame)
    report.users = int(frame['user_id'].nunique()) if len(frame) else 0
    return frame, report


def load_movielens(
    path: str,
    *,
    strict: bool = False,
    seed: int = 0,
    beta_dist: Optional[UniformDist] = None,
) -> Tuple[Population, IngestReport]:
    """Build a population with one agent per user.

    Agents are ordered by user id and carry it as their ``id``. The same
    file and ``seed`` always yield the same population.

    Parameters
    -----------
    path: :class:`str`
        Location of ``u.data``.
    strict: :class:`bool`
        Abort on malformed lines. By default they are skipped and counted.
    seed: :class:`int`
        Master seed of the per-user ``beta`` substreams.
    beta_dist: Optional[:class:`UniformDist`]
        Defaults to ``U(0.5, 5)``.

    Raises
    -------
    InvalidData
        The file cannot be read, holds no valid record, or is malformed in
        strict mode.

    Returns
    --------
    Tuple[:class:`Population`, :class:`IngestReport`]
    """
    beta_dist = beta_dist or UniformDist(0.5, 5.0)
    frame, report = load_ratings(path, strict=strict)
    if report.records == 0:
        raise InvalidData('no valid rating records', path=path)

    means = frame.groupby('user_id', sort=True)['rating'].mean()
    user_ids = means.index.to_numpy(dtype=np.int64)
    alpha = rating_to_alpha(means.to_numpy())
    beta = draw_user_beta(user_ids, beta_dist, seed)

    log.info(
        'Ingested %s: %s users, %s records, %s malformed lines',
        path, report.users, report.records, report.malformed,
    )
    return Population(alpha, beta, user_ids), report
