"""Numba availability and selection of the kernel execution path.

The hot loops in ``_kernels`` are written once and compiled with numba when
it is importable.  Setting the environment variable ``BATTID_NO_NUMBA`` to a
truthy value ("1", "true", "yes") forces the pure-numpy path even when numba
is installed; this is the knob used by the benchmark and by CI to exercise
the fallback.
"""
import os

_FLAG = os.environ.get("BATTID_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes")

try:
    if NUMBA_DISABLED:
        raise ImportError("disabled via BATTID_NO_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        def wrap(func):
            return func

        if args and callable(args[0]) and len(args) == 1 and not kwargs:
            return args[0]
        return wrap
