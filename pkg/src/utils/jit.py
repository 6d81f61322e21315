"""Optional numba acceleration for the per-element kernels."""
from __future__ import annotations

import logging

logger = logging.getLogger(__name__)

try:
    from numba import njit as _numba_njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - optional dependency
    _numba_njit = None
    HAS_NUMBA = False


def njit(func):
    """Compile ``func`` in nopython mode, releasing the GIL, when numba is installed; else return it unchanged."""
    if _numba_njit is None:
        return func
    return _numba_njit(cache=False, nogil=True)(func)


if not HAS_NUMBA:  # pragma: no cover - depends on environment
    logger.debug("numba not installed; kernels run as plain Python")
