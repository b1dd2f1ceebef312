"""Numba switch.

Set ``ANSATZFORGE_DISABLE_NUMBA=1`` to run every kernel through its
pure-numpy fallback. The flag is read once, at import time.
"""

import os

_DISABLED = os.environ.get("ANSATZFORGE_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None

USE_NUMBA = numba is not None and not _DISABLED


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it as is."""
    if numba is None:
        return func
    return numba.njit(cache=True, nogil=True)(func)
