"""Theta functions, level-one characters, holonomies and determinants."""

from ._ellhol import *  # noqa: F401,F403
from ._ellhol import __version__, EllholError, ZeroModeError  # noqa: F401
