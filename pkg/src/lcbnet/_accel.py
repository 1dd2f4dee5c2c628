"""Selects between numba-compiled kernels and pure-numpy fallbacks.

Set ``LCBNET_DISABLE_NUMBA=1`` in the environment to force the numpy path.
The flag is read once at import.
"""
import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("LCBNET_DISABLE_NUMBA", "0").strip().lower() in _FALSY


def njit(fn):
    """``numba.njit(cache=True)`` when numba is enabled, else the plain function."""
    if USE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
