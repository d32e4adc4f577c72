"""Pure-numpy implementations of the hot numeric kernels.

Twin of ``_kernels_numba``; ``optlab.backend`` picks one at import time.
Each function must keep the same signature and, per element, the same
guarded formula as its numba counterpart so the two backends agree to
rounding (reductions may differ in summation order).
"""

import numpy as np


def logistic_loss_sum(margins):
    # ln(1 + e^{-m}) = max(-m, 0) + ln(1 + e^{-|m|}), overflow-free for any m
    return float(np.sum(np.maximum(-margins, 0.0) + np.log1p(np.exp(-np.abs(margins)))))


def logistic_sig_neg(margins):
    # sigma(-m) = 1/(1 + e^m), computed from e^{-|m|} so the exponent never overflows
    t = np.exp(-np.abs(margins))
    return np.where(margins >= 0.0, t / (1.0 + t), 1.0 / (1.0 + t))


def logistic_curvature(margins):
    # e^m / (1 + e^m)^2, symmetric in m, again via e^{-|m|}
    t = np.exp(-np.abs(margins))
    return t / (1.0 + t) ** 2


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def conv2d_valid(data, filt):
    r, c = data.shape
    p, q = filt.shape
    out = np.empty((r - p + 1, c - q + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = np.sum(data[i:i + p, j:j + q] * filt)
    return out
