"""JIT backend selection for the hot kernels.

The slot-loop and Monte Carlo kernels are written once, in numba-compatible
Python over plain numpy arrays. By default they are compiled with
``numba.njit``. Setting the environment variable ``RACHLEARN_NO_NUMBA=1``
(before import), or running on a machine without numba, selects the
interpreted fallback: the same functions run as ordinary Python.

Both backends draw from the same ``numpy.random.Generator`` object, so
results are bit-for-bit identical either way; only speed differs. See
``benchmarks/bench_backends.py`` for a comparison.
"""

from __future__ import annotations

import os

_ENV_FLAG = "RACHLEARN_NO_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in ("1", "true", "yes", "on")


if not _env_disabled():
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via the env flag instead
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:

    def njit(*args, **kwargs):  # noqa: D103 - drop-in signature stand-in
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


def backend_name() -> str:
    """Human-readable name of the active kernel backend."""
    return "numba" if NUMBA_ENABLED else "python"
