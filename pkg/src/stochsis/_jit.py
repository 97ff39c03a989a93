"""Backend selection.

Set ``STOCHSIS_DISABLE_JIT=1`` to skip numba entirely and run the pure-numpy
kernels.  When numba is not installed the numpy path is used automatically.
"""
import os

ENV_FLAG = "STOCHSIS_DISABLE_JIT"


def jit_disabled():
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


numba = None
if not jit_disabled():
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        numba = None

HAVE_NUMBA = numba is not None
BACKEND = "numba" if HAVE_NUMBA else "numpy"

if HAVE_NUMBA:
    from numba.extending import register_jitable

    def njit(fn):
        return numba.njit(nogil=True, cache=True)(fn)
else:
    def register_jitable(fn):
        return fn

    def njit(fn):
        return fn
