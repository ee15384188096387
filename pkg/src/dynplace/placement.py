"""Per-step sensor relocation inside graph Voronoi regions."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import hop_distances, hop_neighborhood, voronoi_partition
from .sampling import RANK_RTOL, greedy_state

PROJ_RTOL = 1e-10


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SensorMove:
    sensor: int
    from_node: int
    to_node: int
    score: float

    def as_dict(self):
        return {"sensor": self.sensor, "from": self.from_node, "to": self.to_node, "score": self.score}


@dataclass(frozen=True, eq=False)
class PlacementState:
    """Sensor positions plus the hop limit (``None`` or ``inf`` = unlimited)."""

    positions: np.ndarray
    hop_limit: float | None = 1
    selection_matrix: np.ndarray | None = None  # D x N, A^T G

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        if np.unique(pos).size != pos.size:
            raise PlacementError(f"sensor positions collide: {pos.tolist()}")
        object.__setattr__(self, "positions", pos)
        if self.hop_limit is not None and self.hop_limit < 0:
            raise ValueError("hop limit must be >= 0")

    @property
    def unlimited(self):
        return self.hop_limit is None or np.isinf(self.hop_limit)


def selection_matrix(dictionary, G=None):
    """``A^T G``; ``G=None`` means the identity."""
    A = np.asarray(dictionary, dtype=float)
    return A.T.copy() if G is None else A.T @ G


def _orth_basis(cols):
    if cols.shape[1] == 0:
        return cols
    U, s, _ = np.linalg.svd(cols, full_matrices=False)
    if s.size == 0 or not s[0] > 0:
        return cols[:, :0]
    return U[:, s > PROJ_RTOL * s[0]]


def psi_scores(N, others, candidates):
    """Energy of each candidate column orthogonal to the columns ``others``.

    ``||nu_y||^2 - ||P nu_y||^2`` with ``P`` the orthogonal projector onto
    ``span(N[:, others])``. Scores at or below ``RANK_RTOL`` times the
    largest column energy of ``N`` are rounding noise and come back as
    exact zeros, the same floor the greedy selection uses.
    """
    V = N[:, np.asarray(candidates, dtype=np.int64)]
    Q = _orth_basis(N[:, np.asarray(others, dtype=np.int64)])
    if Q.shape[1]:
        V = V - Q @ (Q.T @ V)
    energy = np.einsum("ij,ij->j", V, V)
    floor = RANK_RTOL * float(np.einsum("ij,ij->j", N, N).max()) if N.size else 0.0
    energy[energy <= floor] = 0.0
    return energy


def psi_score(N, others, y):
    if y in set(np.asarray(others).tolist()):
        raise ValueError("candidate must not be among the other sensors")
    return float(psi_scores(N, others, [y])[0])


def feasible_set(graph, partition, state, i):
    region = partition.region(i)
    if state.unlimited:
        return region
    hood = hop_neighborhood(graph, state.positions[i], int(state.hop_limit))
    return np.intersect1d(region, hood, assume_unique=True)


def relocate_sensor(state, graph, partition, i, N=None):
    """Best node for sensor ``i`` in its region and hop range.

    The projection runs against every other sensor's current column. A tie
    with the current position keeps the sensor where it is; other ties go
    to the lowest node index.
    """
    N = state.selection_matrix if N is None else N
    here = int(state.positions[i])
    cand = feasible_set(graph, partition, state, i)
    others = np.delete(state.positions, i)
    scores = psi_scores(N, others, cand)
    best = scores.max()
    where_here = np.flatnonzero(cand == here)
    if where_here.size and scores[where_here[0]] == best:
        return SensorMove(i, here, here, float(best))
    j = int(np.argmax(scores))
    return SensorMove(i, here, int(cand[j]), float(scores[j]))


def step(state, graph, dictionary, G=None, workers=1):
    """Relocate every sensor once; returns ``(new_state, moves)``.

    The per-sensor work only reads shared inputs, so ``workers > 1`` runs
    it on a thread pool with results collected in sensor order.
    """
    N = selection_matrix(dictionary, G)
    partition = voronoi_partition(graph, state.positions)
    K = state.positions.size

    def one(i):
        return relocate_sensor(state, graph, partition, i, N)

    if workers > 1 and K > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            moves = list(pool.map(one, range(K)))
    else:
        moves = [one(i) for i in range(K)]
    new_pos = np.array([m.to_node for m in moves], dtype=np.int64)
    check_moves(graph, state, partition, moves)
    return PlacementState(new_pos, state.hop_limit, N), moves


def check_moves(graph, state, partition, moves):
    """Raise :class:`PlacementError` if any move leaves its region or hop range."""
    for m in moves:
        if partition.labels[m.to_node] != m.sensor:
            raise PlacementError(f"sensor {m.sensor} left its Voronoi region")
        if not state.unlimited:
            d = hop_distances(graph, [m.from_node])[0][m.to_node]
            if d > state.hop_limit:
                raise PlacementError(f"sensor {m.sensor} moved {d} hops > {state.hop_limit}")
    dest = [m.to_node for m in moves]
    if len(set(dest)) != len(dest):
        raise PlacementError("two sensors ended on the same node")


def sequential_psi_sum(N, nodes):
    """Sum of Schur increments of ``nodes`` taken in order."""
    total = 0.0
    for s, y in enumerate(nodes):
        total += float(psi_scores(N, nodes[:s], [y])[0])
    return total


@dataclass(frozen=True)
class GapReport:
    distributed: np.ndarray
    centralized: np.ndarray
    distributed_sum: float
    centralized_sum: float
    k: int

    @property
    def lower(self):
        return self.centralized_sum / self.k

    @property
    def holds(self):
        tol = 1e-9 * max(1.0, self.centralized_sum)
        return self.lower - tol <= self.distributed_sum <= self.centralized_sum + tol


def distributed_gap_check(N, graph, state, k=None):
    """Compare one distributed relocation round with centralized greedy.

    Both solutions are scored the same way: the sum of Schur increments of
    their nodes (sensor order for the distributed set, pick order for the
    greedy one), which is what the per-step greedy rule accumulates.
    """
    k = state.positions.size if k is None else k
    if k != state.positions.size:
        raise ValueError("k must match the number of sensors")
    placed = PlacementState(state.positions, state.hop_limit, N)
    partition = voronoi_partition(graph, placed.positions)
    moves = [relocate_sensor(placed, graph, partition, i, N) for i in range(k)]
    q = np.array([m.to_node for m in moves], dtype=np.int64)
    Z = N.T @ N
    r = np.asarray(greedy_state(0.5 * (Z + Z.T), k, fill=True).chosen, dtype=np.int64)
    return GapReport(q, r, sequential_psi_sum(N, q), sequential_psi_sum(N, r), k)
