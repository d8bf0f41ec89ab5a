# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop of the synthesis filter bank.

Input-driven form: every source sample scatter-adds its channel's tap row
into the output at unit stride, so the hot loop is a vectorizable AXPY and
no zero-stuffed temporaries are built.
"""

import numpy as np


def filter_bank_apply(double[::1] x, double[:, ::1] taps, int m_channels,
                      int tap_offset):
    """y[n] = sum_j taps[(n - tap_offset - j) % M, j] * x[n - tap_offset - j]."""
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n_taps = taps.shape[1]
    cdef Py_ssize_t m = m_channels
    cdef Py_ssize_t src, j, j_hi, base
    cdef double v
    out = np.zeros(n_in, dtype=np.float64)
    cdef double[::1] y = out
    cdef const double[:] row
    for src in range(n_in):
        v = x[src]
        if v == 0.0:
            continue
        row = taps[src % m]
        base = src + tap_offset
        j_hi = n_in - base
        if j_hi > n_taps:
            j_hi = n_taps
        for j in range(j_hi):
            y[base + j] += v * row[j]
    return out
