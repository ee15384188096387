"""Weighted undirected graphs, their Laplacian spectrum and hop geometry."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import kernels
from .kernels import UNREACHABLE


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected, undirected graph with nonnegative edge weights.

    ``weights`` may be dense or any scipy sparse matrix; it is stored as CSR.
    ``coordinates`` (N x 2) is optional and only used by generators, the
    edge-list writer and k-NN construction.
    """

    weights: sp.csr_matrix
    coordinates: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        W = sp.csr_matrix(self.weights, dtype=float)
        W.sum_duplicates()
        W.eliminate_zeros()
        W.sort_indices()
        n = W.shape[0]
        if W.shape != (n, n) or n < 1:
            raise GraphError(f"weights must be square, got {W.shape}")
        if W.nnz and W.data.min() < 0:
            raise GraphError("negative edge weight")
        if np.any(W.diagonal() != 0):
            raise GraphError("self loops are not allowed")
        asym = abs(W - W.T)
        if asym.nnz and asym.max() > 1e-12 * max(1.0, abs(W).max()):
            raise GraphError("weights are not symmetric")
        n_comp, _ = connected_components(W, directed=False)
        if n_comp != 1:
            raise GraphError(f"graph has {n_comp} connected components")
        if self.coordinates is not None:
            xy = np.asarray(self.coordinates, dtype=float)
            if xy.shape != (n, 2):
                raise GraphError(f"coordinates must be ({n}, 2), got {xy.shape}")
            object.__setattr__(self, "coordinates", xy)
        object.__setattr__(self, "weights", W)

    @property
    def n_nodes(self):
        return self.weights.shape[0]

    @property
    def n_edges(self):
        return self.weights.nnz // 2

    @property
    def csr(self):
        """(indptr, indices) of the adjacency structure as int64 arrays."""
        if "csr" not in self._cache:
            W = self.weights
            self._cache["csr"] = (
                W.indptr.astype(np.int64),
                W.indices.astype(np.int64),
            )
        return self._cache["csr"]

    def dense(self):
        return self.weights.toarray()

    def degrees(self):
        return np.asarray(self.weights.sum(axis=1)).ravel()


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lmax(self):
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class VoronoiPartition:
    generators: np.ndarray
    labels: np.ndarray  # region index (position in generators) per node
    distances: np.ndarray  # hop distance to the owning generator

    @property
    def regions(self):
        return [np.flatnonzero(self.labels == i) for i in range(len(self.generators))]

    def region(self, i):
        return np.flatnonzero(self.labels == i)


def laplacian(graph, sparse=False):
    """Combinatorial Laplacian ``D - W``."""
    W = graph.weights
    L = sp.diags(graph.degrees()) - W
    return L.tocsr() if sparse else L.toarray()


def spectrum(graph):
    """Ascending eigendecomposition of the Laplacian.

    Each eigenvector is sign-flipped so that its largest-magnitude entry is
    positive; this makes the basis reproducible across runs and platforms.
    """
    if "spectrum" in graph._cache:
        return graph._cache["spectrum"]
    L = laplacian(graph)
    try:
        lam, U = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise GraphError(f"eigendecomposition failed: {exc}") from exc
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    spec = Spectrum(lam, U)
    graph._cache["spectrum"] = spec
    return spec


def gft(spec, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != spec.eigenvectors.shape[0]:
        raise ValueError(f"signal length {x.shape[0]} != {spec.eigenvectors.shape[0]}")
    return spec.eigenvectors.T @ x


def igft(spec, coeffs):
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != spec.eigenvectors.shape[1]:
        raise ValueError(f"coefficient length {coeffs.shape[0]} != {spec.eigenvectors.shape[1]}")
    return spec.eigenvectors @ coeffs


def hop_distances(graph, sources):
    """Unweighted hop count to the nearest source, and which source it is.

    Returns ``(dist, nearest)`` where ``nearest[v]`` is the position in
    ``sources`` of the closest source; equally close sources resolve to the
    earliest one. Unreachable nodes get ``UNREACHABLE`` and -1.
    """
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if src.size == 0:
        raise ValueError("sources must be nonempty")
    if src.min() < 0 or src.max() >= graph.n_nodes:
        raise ValueError("source index out of range")
    indptr, indices = graph.csr
    return kernels.multi_source_bfs(indptr, indices, src)


def hop_neighborhood(graph, node, max_hops):
    """Sorted nodes within ``max_hops`` hops of ``node`` (inclusive)."""
    if max_hops is None or np.isinf(max_hops):
        return np.arange(graph.n_nodes)
    indptr, indices = graph.csr
    return kernels.bfs_within(indptr, indices, np.int64(node), np.int64(max_hops))


def voronoi_partition(graph, sensors):
    """Assign each node to its hop-nearest sensor, ties to the lower sensor index."""
    sensors = np.asarray(sensors, dtype=np.int64)
    if np.unique(sensors).size != sensors.size:
        raise ValueError("sensor positions must be distinct")
    dist, owner = hop_distances(graph, sensors)
    return VoronoiPartition(sensors.copy(), owner, dist)


def _gaussian_knn_weights(points, k):
    n = points.shape[0]
    tree = cKDTree(points)
    d, idx = tree.query(points, k=k + 1)
    d, idx = d[:, 1:], idx[:, 1:]
    sigma = d.mean()
    if sigma <= 0:
        raise GraphError("coincident points; cannot set kernel width")
    w = np.exp(-(d**2) / (2.0 * sigma**2))
    rows = np.repeat(np.arange(n), k)
    W = sp.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(n, n))
    return W.maximum(W.T)


def knn_graph(coordinates, k):
    """Gaussian-kernel k-nearest-neighbor graph, symmetrized by max.

    The kernel width is the mean distance to the k nearest neighbors. Raises
    :class:`GraphError` when the result is disconnected; callers holding real
    data should resample their nodes and retry.
    """
    xy = np.asarray(coordinates, dtype=float)
    n = xy.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    W = _gaussian_knn_weights(xy, k)
    n_comp, _ = connected_components(W, directed=False)
    if n_comp != 1:
        raise GraphError(
            f"{k}-NN graph on {n} points has {n_comp} components; resample nodes or raise k"
        )
    return Graph(W, xy)


def random_sensor_graph(n, seed=None, k=6, max_attempts=100):
    """Random points in the unit square joined by a Gaussian 6-NN kernel."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    rng = np.random.default_rng(seed)
    k = min(k, n - 1)
    for _ in range(max_attempts):
        xy = rng.uniform(0.0, 1.0, size=(n, 2))
        W = _gaussian_knn_weights(xy, k)
        if connected_components(W, directed=False)[0] == 1:
            return Graph(W, xy)
    raise GraphError(f"no connected sensor graph after {max_attempts} attempts")


def path_graph(n):
    W = sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n))
    return Graph(W)


def complete_graph(n):
    return Graph(np.ones((n, n)) - np.eye(n))


def write_edgelist(graph, path):
    """Write ``u v weight`` lines, then a ``coords`` block if present."""
    W = sp.triu(graph.weights, k=1).tocoo()
    with open(path, "w") as fh:
        fh.write(f"# nodes {graph.n_nodes}\n")
        for u, v, w in zip(W.row, W.col, W.data):
            fh.write(f"{u} {v} {float(w)!r}\n")
        if graph.coordinates is not None:
            fh.write("coords\n")
            for x, y in graph.coordinates:
                fh.write(f"{float(x)!r} {float(y)!r}\n")


def read_edgelist(path):
    n = None
    rows, cols, vals, coords = [], [], [], []
    in_coords = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "nodes":
                    n = int(parts[1])
                continue
            if line == "coords":
                in_coords = True
                continue
            parts = line.split()
            if in_coords:
                coords.append((float(parts[0]), float(parts[1])))
            else:
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
    if n is None:
        n = max(max(rows), max(cols)) + 1 if rows else len(coords)
    W = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    W = W + W.T
    return Graph(W, np.array(coords) if coords else None)


__all__ = [
    "Graph",
    "GraphError",
    "Spectrum",
    "VoronoiPartition",
    "UNREACHABLE",
    "laplacian",
    "spectrum",
    "gft",
    "igft",
    "hop_distances",
    "hop_neighborhood",
    "voronoi_partition",
    "knn_graph",
    "random_sensor_graph",
    "path_graph",
    "complete_graph",
    "write_edgelist",
    "read_edgelist",
]
