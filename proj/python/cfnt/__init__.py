"""Toy factorized-transducer decoding with class-based name biasing."""

from ._cfnt import *  # noqa: F401,F403
from ._cfnt import __doc__ as _native_doc  # noqa: F401
