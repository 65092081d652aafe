"""Kernel backend selection.

Hot loops live in :mod:`rayleigh_watch._kernels` in two flavours: numba
``@njit`` versions and pure-numpy equivalents. The choice is made once at
import time from the environment:

``RAYLEIGH_WATCH_NUMBA``
    ``0``/``off``/``false``/``no`` forces the numpy path. Anything else (or
    unset) uses numba when it imports cleanly.
``RAYLEIGH_WATCH_THREADS``
    Caps the numba thread pool. Kernels only parallelise over independent
    x-columns, so results do not depend on this value.
"""

import os

_FALSEY = {"0", "off", "false", "no"}


def _want_numba():
    return os.environ.get("RAYLEIGH_WATCH_NUMBA", "1").strip().lower() not in _FALSEY


try:
    import numba

    # The bundled TBB is too old for numba and warns on every parallel launch.
    if "NUMBA_THREADING_LAYER" not in os.environ:
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _want_numba()


def thread_cap():
    """Requested thread cap from the environment, or None."""
    raw = os.environ.get("RAYLEIGH_WATCH_THREADS")
    if raw is None or raw.strip() == "":
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"RAYLEIGH_WATCH_THREADS must be >= 1, got {raw!r}")
    return n


def configure_threads(n=None):
    """Apply a thread cap to numba; returns the number of threads in use."""
    if n is None:
        n = thread_cap()
    if not HAVE_NUMBA:
        return 1
    if n is not None:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
