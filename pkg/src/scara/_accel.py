"""Backend selection for the numeric kernels.

Set ``SCARA_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The flag is
read once at import time; tests that need both backends call the
``*_numba`` / ``*_numpy`` functions in :mod:`scara.kernels` directly.
"""

from __future__ import annotations

import os

_FALSY = {"", "0", "false", "no", "off"}


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in _FALSY


try:  # pragma: no cover - exercised implicitly by the import
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _flag("SCARA_DISABLE_NUMBA")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

    def wrap(fn):
        return fn

    if args and callable(args[0]):
        return args[0]
    return wrap


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
