import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gammahom import _kernels

needs_numba = pytest.mark.skipif(not _kernels.NUMBA_AVAILABLE, reason="numba not installed")


def _random(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


@needs_numba
@given(dim=st.sampled_from([1, 2]), n=st.integers(1, 9), comps=st.integers(1, 3), seed=st.integers(0, 999))
def test_gather_numba_matches_numpy(dim, n, comps, seed):
    nodal = _random((n + 1,) * dim + (comps,), seed)
    g_np, m_np = _kernels.gather(nodal, 0.3, use_numba=False)
    g_nb, m_nb = _kernels.gather(nodal, 0.3, use_numba=True)
    np.testing.assert_allclose(g_nb, g_np, rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(m_nb, m_np, rtol=1e-13, atol=1e-13)


@needs_numba
@given(dim=st.sampled_from([1, 2]), n=st.integers(1, 9), comps=st.integers(1, 3), seed=st.integers(0, 999))
def test_scatter_numba_matches_numpy(dim, n, comps, seed):
    dA = _random((n,) * dim + (comps, dim), seed)
    ds = _random((n,) * dim + (comps,), seed + 1)
    np.testing.assert_allclose(_kernels.scatter(dA, ds, 0.3, use_numba=True),
                               _kernels.scatter(dA, ds, 0.3, use_numba=False), rtol=1e-13, atol=1e-13)


@given(dim=st.sampled_from([1, 2, 3]), n=st.integers(1, 5), seed=st.integers(0, 999),
       use_numba=st.booleans())
def test_scatter_is_adjoint_of_gather(dim, n, seed, use_numba):
    h = 0.25
    u = _random((n + 1,) * dim + (2,), seed)
    dA = _random((n,) * dim + (2, dim), seed + 1)
    ds = _random((n,) * dim + (2,), seed + 2)
    grad, mid = _kernels.gather(u, h, use_numba=use_numba)
    lhs = np.sum(grad * dA) + np.sum(mid * ds)
    rhs = np.sum(u * _kernels.scatter(dA, ds, h, use_numba=use_numba))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_env_flag_parsing(monkeypatch):
    monkeypatch.setenv("GAMMAHOM_DISABLE_NUMBA", "1")
    assert _kernels._env_disabled()
    monkeypatch.setenv("GAMMAHOM_DISABLE_NUMBA", "0")
    assert not _kernels._env_disabled()
