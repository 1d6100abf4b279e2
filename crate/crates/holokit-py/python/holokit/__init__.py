from .holokit_py import *  # noqa: F401,F403
from .holokit_py import __version__  # noqa: F401
