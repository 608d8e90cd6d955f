"""Backend switch for the compiled kernels.

Set ``DIFFEOKIT_BACKEND=numpy`` to force the pure-numpy fallbacks, even when
numba is importable.  Any other value (or unset) uses numba when available.
"""
from __future__ import annotations

import os

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None
BACKEND = os.environ.get("DIFFEOKIT_BACKEND", "numba").strip().lower()
USE_NUMBA = HAVE_NUMBA and BACKEND != "numpy"


def njit(fn):
    """Compile ``fn`` with numba when it is installed, else return it as is.

    The undecorated function must stay valid Python: it doubles as the
    reference loop when numba is missing.
    """
    if not HAVE_NUMBA:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
