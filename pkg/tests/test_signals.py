import numpy as np
import pytest

from dynplace.graph import path_graph, random_sensor_graph, spectrum
from dynplace.signals import (
    BandlimitedModel,
    PiecewiseConstantModel,
    TimeGrid,
    add_noise,
    bl_signal,
    pc_signal,
    random_connected_partition,
    signal_matrix,
)


@pytest.fixture(scope="module")
def g():
    return random_sensor_graph(64, seed=7)


def test_bl_known_value(g):
    model = BandlimitedModel.from_graph(g, 4)
    t = 0.3
    d = np.sin(10 * t + np.pi * np.arange(1, 5) / 4) / t + 1
    np.testing.assert_allclose(model.coefficients(t), d, rtol=1e-14)
    np.testing.assert_allclose(bl_signal(model, t), spectrum(g).eigenvectors[:, :4] @ d, atol=1e-12)


def test_bl_is_bandlimited(g):
    model = BandlimitedModel.from_graph(g, 4)
    xhat = spectrum(g).eigenvectors.T @ bl_signal(model, 1.7)
    assert np.all(np.abs(xhat[4:]) < 1e-10)


def test_bl_rejects_nonpositive_time(g):
    with pytest.raises(ValueError):
        BandlimitedModel.from_graph(g, 4).coefficients(0.0)


def test_bl_bandwidth_bounds(g):
    with pytest.raises(ValueError):
        BandlimitedModel.from_graph(g, 0)


def test_pc_known_values():
    model = PiecewiseConstantModel(np.array([0, 0, 1, 1, 2, 2]))
    t = 2.0
    d = 3 * (np.exp(-t / 25) * np.sin(np.array([1, 2, 3]) * t + np.array([np.pi / 3, 0, -np.pi / 3])) + 1)
    np.testing.assert_allclose(pc_signal(model, t), np.repeat(d, 2), rtol=1e-14)


def test_pc_requires_three_clusters():
    with pytest.raises(ValueError):
        PiecewiseConstantModel(np.array([0, 1])).coefficients(1.0)


def test_from_clusters_checks():
    with pytest.raises(ValueError, match="overlap"):
        PiecewiseConstantModel.from_clusters([[0, 1], [1, 2]], 3)
    with pytest.raises(ValueError, match="cover"):
        PiecewiseConstantModel.from_clusters([[0], [1]], 3)


def test_partition_connected_and_covering(g):
    clusters = random_connected_partition(g, 3, seed=1)
    assert sorted(np.concatenate(clusters).tolist()) == list(range(64))
    W = g.dense()
    for c in clusters:
        sub = W[np.ix_(c, c)] > 0
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(sub[u]):
                if v not in seen:
                    seen.add(int(v))
                    stack.append(int(v))
        assert len(seen) == len(c)


def test_partition_deterministic(g):
    a = random_connected_partition(g, 3, seed=5)
    b = random_connected_partition(g, 3, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_partition_path_into_n_clusters():
    clusters = random_connected_partition(path_graph(4), 4, seed=0)
    assert sorted(len(c) for c in clusters) == [1, 1, 1, 1]


def test_time_grid():
    tg = TimeGrid(np.pi / 30, 20, 20)
    t = tg.times()
    assert t.size == 40
    np.testing.assert_allclose(t[0], np.pi / 30)
    np.testing.assert_allclose(np.diff(t), np.pi / 30)


def test_signal_matrix_columns(g):
    model = BandlimitedModel.from_graph(g, 4)
    times = [0.5, 1.0]
    X = signal_matrix(model, times)
    np.testing.assert_allclose(X[:, 1], bl_signal(model, 1.0), atol=1e-14)


def test_noise_statistics():
    x = np.zeros(200_000)
    y = add_noise(x, 0.1, seed=3)
    assert abs(y.var() - 0.1) < 0.002
    assert abs(y.mean()) < 0.005


def test_noise_zero_variance_copies():
    x = np.arange(4.0)
    y = add_noise(x, 0.0, seed=0)
    np.testing.assert_array_equal(x, y)
    assert y is not x


def test_noise_seeded():
    a = add_noise(np.zeros(5), 1.0, seed=9)
    b = add_noise(np.zeros(5), 1.0, seed=np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)
