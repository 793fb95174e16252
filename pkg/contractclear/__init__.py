"""
contractclear
~~~~~~~~~~~~~

Decentralized clearing of capacity-constrained contracts among log-linear
agents, the mechanisms it is compared against, and the experiments that
compare them.
"""

__copyright__ = 'contractclear developers 2026-present'
__version__ = '0.1.0'

import logging

from . import utils as utils
from .agent import *
from .clearing import *
from .config import *
from .enums import *
from .errors import *
from .experiments import *
from .mechanisms import *
from .metrics import *
from .movielens import *
from .results import *
from .schedule import *

logging.getLogger(__name__).addHandler(logging.NullHandler())
