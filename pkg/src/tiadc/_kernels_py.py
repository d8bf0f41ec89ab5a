"""Numpy fallback for the synthesis filter-bank kernel.

Same contract as the compiled extension: branch m filters the channel-m
samples left in place (other slots zeroed), branch outputs are summed, and
tap column j of branch m acts at absolute delay tap_offset + m + j.
"""

import numpy as np


def filter_bank_apply(x, taps, m_channels, tap_offset):
    x = np.ascontiguousarray(x, dtype=np.float64)
    taps = np.ascontiguousarray(taps, dtype=np.float64)
    n = x.size
    y = np.zeros(n)
    for m in range(m_channels):
        masked = np.zeros(n)
        masked[m::m_channels] = x[m::m_channels]
        conv = np.convolve(masked, taps[m])
        stop = min(n - tap_offset, conv.size)
        if stop > 0:
            y[tap_offset:tap_offset + stop] += conv[:stop]
    return y
