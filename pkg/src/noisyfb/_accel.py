"""Backend switch for the hot kernels.

Set ``NOISYFB_DISABLE_NUMBA=1`` before import to force the pure-numpy path.
"""

import os

_disabled = os.environ.get("NOISYFB_DISABLE_NUMBA", "0").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def njit(fn):
    """``numba.njit(cache=True)`` when available, otherwise return ``fn`` untouched."""
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn
