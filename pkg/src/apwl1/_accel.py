"""Numba switch.

Set ``APWL1_DISABLE_NUMBA=1`` to force the pure-numpy kernels. Numba is
also skipped silently when it is not importable.
"""
import os

_FLAG = os.environ.get("APWL1_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it as-is."""
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)
