"""Python access to the freeflow C++ library."""

from ._freeflow import *  # noqa: F401,F403
from ._freeflow import __version__  # noqa: F401
