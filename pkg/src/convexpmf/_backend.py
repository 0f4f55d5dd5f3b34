"""Numerical backend selection.

The heavy inner loops in this package exist in two flavours: a numba
``@njit`` compiled one and a plain vectorized numpy one.  Both are built
from the same source (see ``_kernels.build_kernels``); the only difference
is whether the jit decorator is a real numba decorator or a no-op.

The active backend is picked once at import time from the environment
variable ``CONVEXPMF_BACKEND``:

* ``auto`` (default): numba if it can be imported, else numpy
* ``numba``: require numba, raise if unavailable
* ``numpy``: force the pure numpy path
"""

from __future__ import annotations

import os

ENV_BACKEND = "CONVEXPMF_BACKEND"

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def resolve_backend(flag: str | None, numba_available: bool) -> str:
    """Map an environment flag value to a concrete backend name.

    Parameters
    ----------
    flag : str or None
        Raw value of the environment variable (None means unset).
    numba_available : bool
        Whether numba can be imported.

    Returns
    -------
    str
        Either ``"numba"`` or ``"numpy"``.
    """
    value = (flag or "auto").strip().lower()
    if value in ("", "auto"):
        return "numba" if numba_available else "numpy"
    if value == "numba":
        if not numba_available:
            raise RuntimeError(
                "CONVEXPMF_BACKEND=numba but numba is not importable"
            )
        return "numba"
    if value == "numpy":
        return "numpy"
    raise ValueError(
        f"unrecognized {ENV_BACKEND} value {value!r}; "
        "expected auto, numba or numpy"
    )


BACKEND = resolve_backend(os.environ.get(ENV_BACKEND), HAVE_NUMBA)


def noop_jit(func=None, **_kwargs):
    # Stand-in for numba.njit when the numpy path is active.
    if func is not None and callable(func):
        return func

    def decorator(f):
        return f

    return decorator
