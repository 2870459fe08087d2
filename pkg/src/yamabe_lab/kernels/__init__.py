"""Hot-kernel backend selection.

Two interchangeable implementations live side by side: numba-compiled loops
(default) and pure numpy (reference/fallback).  Select explicitly with

    YAMABE_LAB_KERNELS=numpy  |  YAMABE_LAB_KERNELS=numba

If numba is unavailable or fails to import, the numpy path is used and
ACTIVE_BACKEND reports it.  benchmarks/kernel_bench.py compares the two.
"""

import os

from . import _numpy

_requested = os.environ.get("YAMABE_LAB_KERNELS", "numba").strip().lower()

if _requested == "numpy":
    _impl = _numpy
    ACTIVE_BACKEND = "numpy"
elif _requested == "numba":
    try:
        from . import _numba as _impl
        ACTIVE_BACKEND = "numba"
    except ImportError:
        _impl = _numpy
        ACTIVE_BACKEND = "numpy"
else:
    raise ValueError(
        f"YAMABE_LAB_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

jacobi_eigvals = _impl.jacobi_eigvals
jacobi_extremal_batch = _impl.jacobi_extremal_batch
axisym_system = _impl.axisym_system

__all__ = [
    "ACTIVE_BACKEND",
    "jacobi_eigvals",
    "jacobi_extremal_batch",
    "axisym_system",
]
