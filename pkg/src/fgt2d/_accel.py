"""Numba switch for the hot kernels.

Set ``FGT2D_DISABLE_NUMBA=1`` before import to force the pure-numpy paths.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

DISABLED = os.environ.get("FGT2D_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")
USE_NUMBA = HAVE_NUMBA and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
