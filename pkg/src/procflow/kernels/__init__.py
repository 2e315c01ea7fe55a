"""Hot numeric kernels with a numba and a pure-numpy implementation.

The implementation is picked once at import time from ``PROCFLOW_BACKEND``:

* ``numba`` (default when numba imports cleanly) -- ``@njit`` compiled loops
* ``numpy`` -- vectorised numpy fallback, no compilation

Both implementations produce bit-identical results; ``tests/test_kernels.py``
checks this.  :func:`get_backend` gives explicit access to either one.
"""

import importlib
import logging
import os
import warnings

logger = logging.getLogger(__name__)

BACKENDS = ("numba", "numpy")

_KERNEL_NAMES = ("window_sums", "grow_tree", "forest_proba")


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve(requested):
    requested = (requested or "").strip().lower()
    if requested in ("", "auto"):
        return "numba" if numba_available() else "numpy"
    if requested not in BACKENDS:
        raise ValueError(
            f"PROCFLOW_BACKEND must be one of {BACKENDS} or 'auto', got {requested!r}"
        )
    if requested == "numba" and not numba_available():
        warnings.warn("numba is not installed; falling back to the numpy kernels")
        return "numpy"
    return requested


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the active backend)."""
    name = ACTIVE if name is None else _resolve(name)
    return importlib.import_module(f"{__name__}._{name}")


ACTIVE = _resolve(os.environ.get("PROCFLOW_BACKEND"))
logger.debug("procflow kernels: %s backend", ACTIVE)

_active = get_backend(ACTIVE)
window_sums = _active.window_sums
grow_tree = _active.grow_tree
forest_proba = _active.forest_proba

__all__ = ["ACTIVE", "BACKENDS", "get_backend", "numba_available", *_KERNEL_NAMES]
