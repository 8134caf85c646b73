"""Backend selection for the per-path kernels.

The compiled Cython module is used when it imports; otherwise (or when
``SOJOURN_PURE=1`` is set) the numpy fallback is used.  Both backends produce
identical results, so the choice only affects speed.
"""
import os

import numpy as np

from . import _kernels_py

BACKEND = "numpy"
_impl = _kernels_py

if os.environ.get("SOJOURN_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None


def compiled_available() -> bool:
    return _compiled is not None


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def assemble_field(increments, origin, scale, gain, drift):
    return _impl.assemble_field(_c(increments), int(origin), float(scale), float(gain), _c(drift))


def count_above(values, offsets):
    return _impl.count_above(_c(values), offsets)


def kth_largest(values, ks):
    return _impl.kth_largest(_c(values), np.asarray(ks, dtype=np.int64))


def row_max(values):
    # numpy's vectorized reduction beats the compiled loop; both agree exactly
    return _kernels_py.row_max(_c(values))
