"""Pure-numpy versions of the per-path kernels.

They define the reference semantics; the compiled module must agree with
them bit-for-bit (same floating-point operation order).
"""
import numpy as np

SQRT2 = 1.4142135623730951


def assemble_field(increments, origin, scale, gain, drift):
    """Turn unit-lattice increments into ``gain*scale*(C_j - C_origin) - drift_j``.

    ``C_j`` is the cumulative sum of the first ``j`` increments (``C_0 = 0``),
    so the output has one more column than ``increments``.
    """
    inc = np.asarray(increments, dtype=np.float64)
    n, m = inc.shape
    c = np.empty((n, m + 1))
    c[:, 0] = 0.0
    np.cumsum(inc, axis=1, out=c[:, 1:])
    c -= c[:, origin:origin + 1].copy()
    c *= scale
    c *= gain
    c -= drift
    return c


def count_above(values, offsets):
    """Per row, the number of entries with ``value + offset > 0``."""
    v = np.asarray(values, dtype=np.float64)
    off = np.broadcast_to(np.asarray(offsets, dtype=np.float64), (v.shape[0],))
    return np.count_nonzero(v + off[:, None] > 0.0, axis=1).astype(np.int64)


def kth_largest(values, ks):
    """Per row, the k-th largest entries for each 1-based ``k`` in ``ks``."""
    v = np.asarray(values, dtype=np.float64)
    ks = np.asarray(ks, dtype=np.int64)
    if ks.size == 0:
        return np.empty((v.shape[0], 0))
    if ks.min() < 1 or ks.max() > v.shape[1]:
        raise ValueError("order-statistic rank out of range")
    part = np.partition(-v, ks - 1, axis=1)
    return -part[:, ks - 1]


def row_max(values):
    return np.asarray(values, dtype=np.float64).max(axis=1)
