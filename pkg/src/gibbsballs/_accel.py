"""Numba switch for the hot kernels.

Set ``GIBBSBALLS_NO_NUMBA=1`` before import to force the pure-numpy
fallbacks (useful for debugging and for the benchmark comparison).
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("GIBBSBALLS_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

USE_NUMBA = numba is not None and not _DISABLED


def njit(func):
    """Compile ``func`` lazily with numba; identity when numba is missing."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)
