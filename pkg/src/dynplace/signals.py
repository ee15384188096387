"""Synthetic time-varying graph signals and measurement noise."""
from dataclasses import dataclass

import numpy as np

from .graph import spectrum

PC_FREQS = np.array([1.0, 2.0, 3.0])
PC_SHIFTS = np.array([np.pi / 3, 0.0, -np.pi / 3])


@dataclass(frozen=True, eq=False)
class BandlimitedModel:
    basis: np.ndarray  # N x M, the lowest-frequency Laplacian eigenvectors

    @classmethod
    def from_graph(cls, graph, bandwidth):
        U = spectrum(graph).eigenvectors
        if not 1 <= bandwidth <= U.shape[1]:
            raise ValueError(f"bandwidth must be in [1, {U.shape[1]}]")
        return cls(U[:, :bandwidth].copy())

    @property
    def bandwidth(self):
        return self.basis.shape[1]

    def coefficients(self, t):
        """``(1/t) sin(10 t + pi i / M) + 1`` for i = 1..M."""
        if t <= 0:
            raise ValueError("time must be positive")
        M = self.bandwidth
        phase = np.pi / M * np.arange(1, M + 1)
        return np.sin(10.0 * t + phase) / t + 1.0

    @property
    def generator(self):
        return self.basis


@dataclass(frozen=True, eq=False)
class PiecewiseConstantModel:
    labels: np.ndarray  # cluster id per node

    @classmethod
    def from_clusters(cls, clusters, n_nodes):
        labels = np.full(n_nodes, -1, dtype=np.int64)
        for i, members in enumerate(clusters):
            if np.any(labels[members] >= 0):
                raise ValueError("clusters overlap")
            labels[members] = i
        if np.any(labels < 0):
            raise ValueError("clusters do not cover every node")
        return cls(labels)

    @property
    def n_clusters(self):
        return int(self.labels.max()) + 1

    @property
    def generator(self):
        """N x M matrix of cluster indicator columns."""
        A = np.zeros((self.labels.size, self.n_clusters))
        A[np.arange(self.labels.size), self.labels] = 1.0
        return A

    def coefficients(self, t):
        if self.n_clusters != 3:
            raise ValueError(f"piecewise-constant law is defined for 3 clusters, got {self.n_clusters}")
        return 3.0 * (np.exp(-t / 25.0) * np.sin(PC_FREQS * t + PC_SHIFTS) + 1.0)


@dataclass(frozen=True)
class TimeGrid:
    sampling_period: float
    n_train: int
    n_test: int

    def __post_init__(self):
        if self.sampling_period <= 0:
            raise ValueError("sampling period must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be positive")

    def times(self):
        """t_k = k T_s for k = 1 .. n_train + n_test."""
        return self.sampling_period * np.arange(1, self.n_train + self.n_test + 1)


def bl_signal(model, t):
    return model.basis @ model.coefficients(t)


def pc_signal(model, t):
    return model.coefficients(t)[model.labels]


def signal_matrix(model, times):
    """Stack signals at ``times`` as columns (N x T)."""
    return np.column_stack([model.generator @ model.coefficients(t) for t in times])


def random_connected_partition(graph, m, seed=None, max_attempts=100):
    """Split the nodes into ``m`` connected clusters by seeded region growing.

    Seeds are drawn uniformly; then a random growable region absorbs one of
    its unassigned neighbors until every node is taken.
    """
    n = graph.n_nodes
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= N, got m={m}")
    rng = np.random.default_rng(seed)
    indptr, indices = graph.csr
    for _ in range(max_attempts):
        labels = np.full(n, -1, dtype=np.int64)
        seeds = rng.choice(n, size=m, replace=False)
        labels[seeds] = np.arange(m)
        frontier = [set() for _ in range(m)]
        for i, s in enumerate(seeds):
            frontier[i].update(int(v) for v in indices[indptr[s] : indptr[s + 1]] if labels[v] < 0)
        remaining = n - m
        while remaining:
            live = [i for i in range(m) if frontier[i]]
            if not live:
                break
            i = live[rng.integers(len(live))]
            cand = sorted(frontier[i])
            v = cand[rng.integers(len(cand))]
            labels[v] = i
            remaining -= 1
            for f in frontier:
                f.discard(v)
            frontier[i].update(int(w) for w in indices[indptr[v] : indptr[v + 1]] if labels[w] < 0)
        if remaining == 0 and np.bincount(labels, minlength=m).min() > 0:
            return [np.flatnonzero(labels == i) for i in range(m)]
    raise RuntimeError(f"region growing failed after {max_attempts} attempts")


def add_noise(x, variance, seed=None):
    """``x`` plus i.i.d. N(0, variance) noise; ``seed`` may be a Generator."""
    if variance < 0:
        raise ValueError("variance must be >= 0")
    x = np.asarray(x, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if variance == 0:
        return x.copy()
    return x + rng.normal(0.0, np.sqrt(variance), size=x.shape)
