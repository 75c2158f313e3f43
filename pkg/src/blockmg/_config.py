"""Runtime switches read from the environment.

``BLOCKMG_DISABLE_NUMBA=1`` routes every hot kernel through its pure
numpy/scipy implementation.  The flag is read once at import time.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _flag(name, default="0"):
    return os.environ.get(name, default).strip().lower() in _TRUTHY


DISABLE_NUMBA = _flag("BLOCKMG_DISABLE_NUMBA")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLE_NUMBA


def env_int(name, default):
    """Integer environment override, falling back to ``default``."""
    value = os.environ.get(name)
    if value is None or not value.strip():
        return default
    return int(value)
