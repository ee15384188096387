import numpy as np
import pytest

from dynplace import _accel


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    """Run the test once per kernel backend."""
    prev = _accel.use_numba(request.param == "numba")
    yield request.param
    _accel.use_numba(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_weighted_graph(n, rng, p=0.3):
    """Erdos-Renyi weights on top of a random spanning path (always connected)."""
    W = np.triu(rng.uniform(0.1, 2.0, (n, n)) * (rng.random((n, n)) < p), 1)
    perm = rng.permutation(n)
    for a, b in zip(perm[:-1], perm[1:]):
        W[min(a, b), max(a, b)] = rng.uniform(0.1, 2.0)
    return W + W.T
