"""Node-wise sampling, subspace reconstruction and greedy D-optimal selection."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .signals import add_noise

PINV_RTOL = 1e-10
# increments at or below this fraction of max(diag Z) count as zero
RANK_RTOL = 1e-10


class DegenerateSampling(np.linalg.LinAlgError):
    pass


class RankDeficient(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class SamplingOperator:
    """Rows ``nodes`` of the filter ``G``; ``G=None`` means the identity."""

    nodes: np.ndarray
    G: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        if np.unique(nodes).size != nodes.size:
            raise ValueError("sampling nodes must be distinct")
        object.__setattr__(self, "nodes", nodes)

    def rows(self, A):
        """``S^T A`` for an N x D matrix ``A``."""
        if self.G is None:
            return A[self.nodes]
        return self.G[self.nodes] @ A

    def apply(self, x):
        if self.G is None:
            return np.asarray(x)[self.nodes]
        return self.G[self.nodes] @ x


def sample(op, x, noise_variance=0.0, seed=None):
    """``(G (x + m))`` at the operator's nodes with white noise ``m``."""
    return op.apply(add_noise(x, noise_variance, seed))


def pinv(M, rtol=PINV_RTOL):
    """Moore-Penrose pseudoinverse with a relative singular-value cutoff."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or not s[0] > 0:
        raise DegenerateSampling("degenerate sampling: all singular values vanish")
    keep = s > rtol * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def reconstruct(op, A, c):
    """Best recovery ``A (S^T A)^+ c``."""
    A = np.asarray(A, dtype=float)
    return A @ (pinv(op.rows(A)) @ np.asarray(c, dtype=float))


def build_Z(A, G=None):
    """``G A A^T G`` (``G=None`` for the identity), symmetrized."""
    GA = A if G is None else G @ A
    Z = GA @ GA.T
    return 0.5 * (Z + Z.T)


@dataclass
class SelectionState:
    """Greedy selection so far: chosen nodes and their Schur increments.

    Rather than carry ``inv(Z_M)`` the state keeps the rows of the partial
    Cholesky factor, which gives every candidate's Schur complement in O(N)
    per appended node.
    """

    chosen: list = field(default_factory=list)
    increments: list = field(default_factory=list)

    @property
    def logdet(self):
        return float(np.sum(np.log(self.increments))) if self.increments else 0.0


def greedy_state(Z, k, fill=False):
    """Greedy D-optimal sampling set of size ``k`` on the PSD matrix ``Z``.

    Each step appends the node maximizing ``Z_yy - Z_yM inv(Z_M) Z_My``;
    ties go to the lowest index. When fewer than ``k`` nodes carry a
    positive increment, raise :class:`RankDeficient`, or with ``fill=True``
    complete the set with the remaining nodes of largest ``Z_yy``.
    """
    Z = np.ascontiguousarray(Z, dtype=float)
    n = Z.shape[0]
    if Z.shape != (n, n):
        raise ValueError("Z must be square")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}")
    diag = np.diag(Z)
    floor = RANK_RTOL * max(float(diag.max()), 0.0)
    chosen, incs = kernels.greedy_det(Z, np.int64(k), floor)
    state = SelectionState(chosen.tolist(), incs.tolist())
    if len(state.chosen) < k:
        if not fill:
            raise RankDeficient(
                f"rank deficient: only {len(state.chosen)} of {k} nodes have a positive increment"
            )
        rest = np.setdiff1d(np.arange(n), chosen)
        order = rest[np.lexsort((rest, -diag[rest]))]
        state.chosen.extend(order[: k - len(state.chosen)].tolist())
    return state


def greedy_select(Z, k, fill=False):
    """Ordered node list from :func:`greedy_state`."""
    return np.asarray(greedy_state(Z, k, fill=fill).chosen, dtype=np.int64)
