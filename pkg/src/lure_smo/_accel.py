"""JIT switch for the numeric kernels.

Kernels are written as plain loops over float64 arrays so the same source
runs compiled under numba or interpreted as ordinary Python/numpy.  Set
``LURE_SMO_DISABLE_JIT=1`` before import to force the interpreted path
(useful for debugging and for the benchmark comparison).
"""

import os

_FLAG = os.environ.get("LURE_SMO_DISABLE_JIT", "").strip().lower()
JIT_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None

NUMBA_ENABLED = numba is not None and not JIT_DISABLED


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it unchanged."""
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


def py_func(fn):
    """The uncompiled Python function behind a kernel."""
    return getattr(fn, "py_func", fn)
