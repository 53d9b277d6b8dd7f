"""JIT shim.

Hot kernels are decorated with :func:`njit` from this module. Setting the
environment variable ``COEVO_DISABLE_NUMBA=1`` (read once, at import) makes
the decorator a no-op so the same kernels run as plain numpy/Python code.
"""
import os

DISABLE_ENV = "COEVO_DISABLE_NUMBA"

NUMBA_ENABLED = os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency in CI
        NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator.

    The wrapped function always exposes ``py_func`` so callers and tests can
    reach the interpreted version regardless of the flag.
    """
    if NUMBA_ENABLED:
        return numba.njit(*args, **kwargs)

    def identity(func):
        func.py_func = func
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return identity(args[0])
    return identity
