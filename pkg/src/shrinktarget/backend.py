"""Backend selection for the hot kernels.

Two implementations of every kernel exist: a numba-compiled one and a pure
numpy one.  The active backend is chosen by the SHRINKTARGET_BACKEND
environment variable:

    auto   (default) use numba if it imports and compiles, else numpy
    numba  require numba, fail loudly if unavailable
    numpy  force the pure-numpy fallback

Both backends are bit-identical for the counter-based random streams, so
results never depend on the choice; only speed does.
"""

import os

from .errors import ParameterError

_VALID = ("auto", "numba", "numpy")


def requested_backend() -> str:
    """The backend named by the environment (not yet resolved)."""
    name = os.environ.get("SHRINKTARGET_BACKEND", "auto").strip().lower()
    if name not in _VALID:
        raise ParameterError(
            f"SHRINKTARGET_BACKEND must be one of {_VALID}, got {name!r}"
        )
    return name


_resolved = None


def active_backend() -> str:
    """Resolve 'auto' to a concrete backend, caching the answer."""
    global _resolved
    name = requested_backend()
    if name == "numpy":
        return "numpy"
    if _resolved is None:
        try:
            import numba  # noqa: F401

            _resolved = "numba"
        except ImportError:
            if name == "numba":
                raise
            _resolved = "numpy"
    if name == "numba" and _resolved != "numba":
        raise ParameterError("SHRINKTARGET_BACKEND=numba but numba is unavailable")
    return _resolved


def get_kernels():
    """Return the kernel module for the active backend."""
    if active_backend() == "numba":
        from . import _kernels_numba as k
    else:
        from . import _kernels_numpy as k
    return k


def set_threads(n: int) -> None:
    """Pin the numba thread count (no-op on the numpy backend)."""
    if n < 1:
        raise ParameterError("thread count must be >= 1")
    if active_backend() == "numba":
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
