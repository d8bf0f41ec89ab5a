"""Kernel backends: numpy fallback versus the compiled extension."""

import importlib

import numpy as np
import pytest

from tiadc import _kernels_py
from tiadc import kernels


def _backends():
    impls = [("numpy", _kernels_py)]
    try:
        compiled = importlib.import_module("tiadc._kernels")
        impls.append(("compiled", compiled))
    except ImportError:
        pass
    return impls


BACKENDS = _backends()


def dense_reference(x, taps, m_ch, offset):
    n = x.size
    y = np.zeros(n)
    for src in range(n):
        for j in range(taps.shape[1]):
            out = src + offset + j
            if 0 <= out < n:
                y[out] += taps[src % m_ch, j] * x[src]
    return y


@pytest.mark.parametrize("name,impl", BACKENDS)
@pytest.mark.parametrize("m_ch,n_taps,offset", [(4, 9, 0), (4, 9, 3),
                                                 (2, 5, 0), (3, 7, 1)])
def test_matches_dense_reference(name, impl, m_ch, n_taps, offset):
    rng = np.random.default_rng(7)
    x = rng.normal(size=m_ch * 40)
    taps = rng.normal(size=(m_ch, n_taps))
    y = impl.filter_bank_apply(np.ascontiguousarray(x),
                               np.ascontiguousarray(taps), m_ch, offset)
    ref = dense_reference(x, taps, m_ch, offset)
    assert np.max(np.abs(y - ref)) <= 1e-12


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    rng = np.random.default_rng(13)
    x = rng.normal(size=4096)
    taps = rng.normal(size=(4, 65))
    outs = [impl.filter_bank_apply(np.ascontiguousarray(x),
                                   np.ascontiguousarray(taps), 4, 0)
            for _, impl in BACKENDS]
    assert np.max(np.abs(outs[0] - outs[1])) <= 1e-12


def test_dispatcher_validates():
    with pytest.raises(ValueError):
        kernels.apply_filter_bank(np.zeros(8), np.zeros((2, 3)), 4, 0)
    with pytest.raises(ValueError):
        kernels.apply_filter_bank(np.zeros(8), np.zeros((4, 3)), 4, -1)


def test_dispatcher_reports_backend():
    assert kernels.BACKEND in ("compiled", "numpy")
