"""Numba and numpy kernels must agree on the same inputs."""
import numpy as np
import pytest

from dynplace import _accel, kernels
from dynplace.graph import laplacian, random_sensor_graph


def both(kernel, *args):
    return kernel.jitted(*args), kernel.fallback(*args)


@pytest.fixture(scope="module")
def g():
    return random_sensor_graph(80, seed=21)


def test_use_numba_toggles():
    prev = _accel.use_numba(False)
    try:
        assert not _accel.numba_enabled()
        assert _accel.use_numba(True) is False
        assert _accel.numba_enabled()
    finally:
        _accel.use_numba(prev)


def test_multi_source_bfs(g):
    indptr, indices = g.csr
    src = np.array([5, 40, 3], dtype=np.int64)
    (d1, o1), (d2, o2) = both(kernels.multi_source_bfs, indptr, indices, src)
    np.testing.assert_array_equal(d1, d2)
    np.testing.assert_array_equal(o1, o2)


@pytest.mark.parametrize("hops", [0, 1, 3, 1000])
def test_bfs_within(g, hops):
    indptr, indices = g.csr
    a, b = both(kernels.bfs_within, indptr, indices, np.int64(7), np.int64(hops))
    np.testing.assert_array_equal(a, b)


def test_chebyshev_apply(g, rng):
    L = laplacian(g, sparse=True)
    X = rng.standard_normal((80, 3))
    coeffs = rng.standard_normal(12)
    args = (L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data.astype(float), X, coeffs, 7.5)
    a, b = both(kernels.chebyshev_apply, *args)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_ista(rng):
    A = rng.standard_normal((30, 6)) / 6
    X = rng.standard_normal((30, 6))
    C0 = np.ones((6, 6))
    h1, h2 = np.zeros(201), np.zeros(201)
    C1, n1 = kernels.ista.jitted(A, X, C0, 0.05, 0.3, 1e-10, np.int64(200), h1)
    C2, n2 = kernels.ista.fallback(A, X, C0, 0.05, 0.3, 1e-10, np.int64(200), h2)
    assert n1 == n2
    np.testing.assert_allclose(C1, C2, atol=1e-12)
    np.testing.assert_allclose(h1[: n1 + 1], h2[: n2 + 1], rtol=1e-12)


def test_greedy_det(rng):
    B = rng.standard_normal((25, 7))
    Z = B @ B.T
    (c1, i1), (c2, i2) = both(kernels.greedy_det, Z, np.int64(7), 1e-10)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_allclose(i1, i2, rtol=1e-10)
