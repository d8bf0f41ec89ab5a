"""Kernel dispatch: compiled extension when built, numpy fallback otherwise."""

import numpy as np

try:
    from tiadc import _kernels as _impl
    BACKEND = "compiled"
except ImportError:  # extension not built
    from tiadc import _kernels_py as _impl
    BACKEND = "numpy"


def apply_filter_bank(samples, taps, m_channels, tap_offset=0):
    """Run the M-branch synthesis bank over an interleaved record.

    ``taps`` is an (M, L) array; tap j of branch m acts at absolute delay
    ``tap_offset + m + j``. Output has the same length as the input and is
    zero-padded at the edges.
    """
    samples = np.ascontiguousarray(samples, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    if taps.ndim != 2 or taps.shape[0] != m_channels:
        raise ValueError("taps must have shape (m_channels, n_taps)")
    if tap_offset < 0:
        raise ValueError("tap_offset must be non-negative")
    return _impl.filter_bank_apply(samples, taps, m_channels, int(tap_offset))
