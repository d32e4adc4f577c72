"""Kernel backend selection.

The hot elementwise kernels (guarded logistic transforms, soft threshold,
valid convolution) ship in two interchangeable implementations: a
numba-compiled one, used by default whenever numba imports, and a pure-numpy
fallback.  Set ``OPTLAB_BACKEND=numpy`` or ``OPTLAB_BACKEND=numba`` before
import to force a choice; anything else raises.  Matrix products stay on
numpy/BLAS in both backends.
"""

import os

_requested = os.environ.get("OPTLAB_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise RuntimeError(
        f"OPTLAB_BACKEND must be 'numba', 'numpy', or 'auto', got {_requested!r}"
    )

if _requested == "numpy":
    from . import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _kernels_numpy as _impl

        BACKEND = "numpy"

logistic_loss_sum = _impl.logistic_loss_sum
logistic_sig_neg = _impl.logistic_sig_neg
logistic_curvature = _impl.logistic_curvature
soft_threshold = _impl.soft_threshold
conv2d_valid = _impl.conv2d_valid


def warmup():
    """Force JIT compilation of every kernel (no-op on the numpy backend)."""
    import numpy as np

    m = np.array([-1.0, 0.0, 1.0])
    logistic_loss_sum(m)
    logistic_sig_neg(m)
    logistic_curvature(m)
    soft_threshold(m, 0.5)
    conv2d_valid(np.ones((2, 2)), np.ones((1, 1)))
