"""Numerically stable elementwise helpers."""

import numpy as np


def sigmoid(x):
    """Logistic function without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    pos = flat >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-flat[pos]))
    ex = np.exp(flat[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out.reshape(x.shape)


def lower_median(values):
    """Median that picks the lower middle element for even counts."""
    values = np.sort(np.asarray(values, dtype=np.float64).ravel())
    return float(values[(values.size - 1) // 2])
