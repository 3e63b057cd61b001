"""Switch between numba-compiled kernels and the pure-numpy fallback.

Set ``CBSA_DISABLE_NUMBA=1`` to force the fallback path (useful when
debugging or on platforms without a working LLVM).
"""

import functools
import os

_FLAG = os.environ.get("CBSA_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")

if numba is not None:
    njit = functools.partial(numba.njit, cache=True, nogil=True)
else:  # pragma: no cover
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
