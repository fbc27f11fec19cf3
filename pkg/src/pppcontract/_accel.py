"""Backend selection for the hot loops.

Kernels are written once in loop form and compiled with ``numba.njit`` when
numba is importable and ``PPPCONTRACT_DISABLE_NUMBA`` is unset (or ``0``).
Each kernel module also carries a vectorised numpy twin; :func:`use_numba`
tells callers which one to dispatch to.
"""
import os
import warnings

_FLAG = "PPPCONTRACT_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships in the test image
    HAVE_NUMBA = False
    _numba_njit = None


def use_numba():
    """True when compiled kernels should be used (re-read on every call)."""
    return HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``; identity decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba_njit(*args, **kwargs)


if not HAVE_NUMBA and not _disabled_by_env():  # pragma: no cover
    warnings.warn("numba not importable; running the numpy fallback kernels")
