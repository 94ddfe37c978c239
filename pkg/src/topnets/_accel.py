"""Numba toggle.

Kernels are compiled with ``numba.njit`` unless ``TOPNETS_DISABLE_NUMBA`` is
set to a truthy value or numba cannot be imported, in which case callers use
their pure-numpy fallbacks instead.
"""
import os
import warnings

_FLAG = os.environ.get("TOPNETS_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False
    _njit = None
    warnings.warn("numba could not be imported; using numpy kernels")

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """``numba.njit(cache=True)`` when available, else the function unchanged."""
    if HAVE_NUMBA:
        return _njit(cache=True)(fn)
    return fn


def backend():
    return "numba" if USE_NUMBA else "numpy"
