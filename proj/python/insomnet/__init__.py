"""Insomnia identification from sleep EEG (C++ core)."""

from ._insomnet import *  # noqa: F401,F403
from ._insomnet import InsomnetError, __version__  # noqa: F401
