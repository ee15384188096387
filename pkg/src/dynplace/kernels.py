"""Hot inner loops, each with an ``@njit`` body and a pure-numpy twin.

The public names at the bottom of the module dispatch on the backend flag in
:mod:`dynplace._accel`. Both paths take plain ndarrays (CSR triplets for
graphs) so numba never sees a scipy object.
"""
import numpy as np
import scipy.sparse as sp

from ._accel import dispatch, jit

UNREACHABLE = np.iinfo(np.int64).max


# ---------------------------------------------------------------------------
# multi-source breadth-first search
# ---------------------------------------------------------------------------


@jit
def _multi_source_bfs_jit(indptr, indices, sources):
    n = indptr.shape[0] - 1
    unreach = np.iinfo(np.int64).max
    dist = np.full(n, unreach, dtype=np.int64)
    owner = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in range(sources.shape[0]):
        v = sources[s]
        if dist[v] == unreach:
            dist[v] = 0
            owner[v] = s
            queue[tail] = v
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        ou = owner[u]
        for p in range(indptr[u], indptr[u + 1]):
            w = indices[p]
            if dist[w] == unreach:
                dist[w] = du
                owner[w] = ou
                queue[tail] = w
                tail += 1
            elif dist[w] == du and ou < owner[w]:
                # every parent of w is dequeued before w is, so owner[w]
                # is final by the time w expands
                owner[w] = ou
    return dist, owner


def _gather_neighbors(indptr, indices, nodes):
    starts = indptr[nodes]
    counts = indptr[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), counts
    offsets = np.repeat(starts - (np.cumsum(counts) - counts), counts)
    return indices[np.arange(total) + offsets].astype(np.int64), counts


def _multi_source_bfs_np(indptr, indices, sources):
    """Hop distance to the nearest source and that source's position.

    Ties between equally near sources go to the one listed first.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, UNREACHABLE, dtype=np.int64)
    owner = np.full(n, -1, dtype=np.int64)
    sources = np.asarray(sources, dtype=np.int64)
    _, first = np.unique(sources, return_index=True)
    first = np.sort(first)
    frontier = sources[first]
    dist[frontier] = 0
    owner[frontier] = first
    level = 0
    while frontier.size:
        level += 1
        nbr, counts = _gather_neighbors(indptr, indices, frontier)
        par_owner = np.repeat(owner[frontier], counts)
        fresh = dist[nbr] == UNREACHABLE
        nbr, par_owner = nbr[fresh], par_owner[fresh]
        if nbr.size == 0:
            break
        order = np.lexsort((par_owner, nbr))
        nbr, par_owner = nbr[order], par_owner[order]
        keep = np.ones(nbr.size, dtype=bool)
        keep[1:] = nbr[1:] != nbr[:-1]
        frontier = nbr[keep]
        dist[frontier] = level
        owner[frontier] = par_owner[keep]
    return dist, owner


# ---------------------------------------------------------------------------
# depth-limited single-source search (P-hop neighborhoods)
# ---------------------------------------------------------------------------


@jit
def _bfs_within_jit(indptr, indices, source, max_hops):
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        if dist[u] >= max_hops:
            continue
        for p in range(indptr[u], indptr[u + 1]):
            w = indices[p]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue[tail] = w
                tail += 1
    return np.sort(queue[:tail])


def _bfs_within_np(indptr, indices, source, max_hops):
    """Sorted node ids within ``max_hops`` hops of ``source``."""
    n = indptr.shape[0] - 1
    seen = np.zeros(n, dtype=bool)
    seen[source] = True
    frontier = np.array([source], dtype=np.int64)
    for _ in range(max_hops):
        nbr, _ = _gather_neighbors(indptr, indices, frontier)
        nbr = np.unique(nbr[~seen[nbr]])
        if nbr.size == 0:
            break
        seen[nbr] = True
        frontier = nbr
    return np.flatnonzero(seen).astype(np.int64)


# ---------------------------------------------------------------------------
# Chebyshev three-term recurrence on the shifted Laplacian
# ---------------------------------------------------------------------------


@jit
def _shifted_matvec(indptr, indices, data, x, scale, alpha, prev, out):
    # out = alpha * (scale * (L @ x) - x) - prev; prev may be all zeros
    n, m = x.shape
    acc = np.empty(m)
    for i in range(n):
        acc[:] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            w = data[p]
            row = indices[p]
            for c in range(m):
                acc[c] += w * x[row, c]
        for c in range(m):
            out[i, c] = alpha * (scale * acc[c] - x[i, c]) - prev[i, c]


@jit
def _chebyshev_apply_jit(indptr, indices, data, x, coeffs, lmax):
    scale = 2.0 / lmax
    out = 0.5 * coeffs[0] * x
    if coeffs.shape[0] == 1:
        return out
    t_prev = x.copy()
    t_cur = np.empty_like(x)
    _shifted_matvec(indptr, indices, data, t_prev, scale, 1.0, np.zeros_like(x), t_cur)
    out += coeffs[1] * t_cur
    t_next = np.empty_like(x)
    for j in range(2, coeffs.shape[0]):
        _shifted_matvec(indptr, indices, data, t_cur, scale, 2.0, t_prev, t_next)
        out += coeffs[j] * t_next
        t_prev, t_cur, t_next = t_cur, t_next, t_prev
    return out


def _chebyshev_apply_np(indptr, indices, data, x, coeffs, lmax):
    """Sum of ``coeffs[j] * T_j(2L/lmax - I) @ x`` with the first term halved."""
    n = indptr.shape[0] - 1
    lap = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    scale = 2.0 / lmax

    def shifted(v):
        return scale * (lap @ v) - v

    out = 0.5 * coeffs[0] * x
    if coeffs.shape[0] == 1:
        return out
    t_prev = x
    t_cur = shifted(x)
    out = out + coeffs[1] * t_cur
    for j in range(2, coeffs.shape[0]):
        t_prev, t_cur = t_cur, 2.0 * shifted(t_cur) - t_prev
        out = out + coeffs[j] * t_cur
    return out


# ---------------------------------------------------------------------------
# ISTA for min ||X - A C||_F^2 + mu ||C||_1
# ---------------------------------------------------------------------------


@jit
def _ista_jit(A, X, C0, gamma, mu, eps, max_iters, history):
    AtA = A.T @ A
    AtX = A.T @ X
    thr = gamma * mu
    C = C0.copy()
    n_iter = 0
    if history.shape[0] > 0:
        r = X - A @ C
        history[0] = np.sum(r * r) + mu * np.sum(np.abs(C))
    while n_iter < max_iters:
        V = C - 2.0 * gamma * (AtA @ C - AtX)
        Cn = np.sign(V) * np.maximum(np.abs(V) - thr, 0.0)
        diff = Cn - C
        delta = np.sum(diff * diff)
        C = Cn
        n_iter += 1
        if history.shape[0] > 0:
            r = X - A @ C
            history[n_iter] = np.sum(r * r) + mu * np.sum(np.abs(C))
        if delta < eps:
            break
    return C, n_iter


def _ista_np(A, X, C0, gamma, mu, eps, max_iters, history):
    """Proximal-gradient iterations from ``C0``; returns (C, iterations).

    When ``history`` is non-empty it receives the objective after every
    iterate, starting with the objective at ``C0``.
    """
    AtA = A.T @ A
    AtX = A.T @ X
    thr = gamma * mu
    C = C0.copy()
    record = history.shape[0] > 0
    if record:
        history[0] = np.sum((X - A @ C) ** 2) + mu * np.abs(C).sum()
    n_iter = 0
    while n_iter < max_iters:
        V = C - 2.0 * gamma * (AtA @ C - AtX)
        Cn = np.sign(V) * np.maximum(np.abs(V) - thr, 0.0)
        delta = np.sum((Cn - C) ** 2)
        C = Cn
        n_iter += 1
        if record:
            history[n_iter] = np.sum((X - A @ C) ** 2) + mu * np.abs(C).sum()
        if delta < eps:
            break
    return C, n_iter


# ---------------------------------------------------------------------------
# greedy determinant maximization via partial pivoted Cholesky
# ---------------------------------------------------------------------------


@jit
def _greedy_det_jit(Z, k, floor):
    n = Z.shape[0]
    R = np.zeros((k, n))
    resid = np.empty(n)
    for i in range(n):
        resid[i] = Z[i, i]
    taken = np.zeros(n, dtype=np.bool_)
    chosen = np.full(k, -1, dtype=np.int64)
    incs = np.zeros(k)
    count = 0
    for s in range(k):
        best = -1
        bv = -np.inf
        for y in range(n):
            if not taken[y] and resid[y] > bv:
                bv = resid[y]
                best = y
        if best < 0 or bv <= floor:
            break
        chosen[s] = best
        incs[s] = bv
        taken[best] = True
        root = np.sqrt(bv)
        for y in range(n):
            acc = Z[best, y]
            for j in range(s):
                acc -= R[j, best] * R[j, y]
            R[s, y] = acc / root
            resid[y] -= R[s, y] * R[s, y]
        count += 1
    return chosen[:count], incs[:count]


def _greedy_det_np(Z, k, floor):
    """Pick up to ``k`` indices, each maximizing the Schur complement.

    Returns the chosen indices and their increments. Stops early when the
    best remaining increment is at or below ``floor``.
    """
    n = Z.shape[0]
    R = np.zeros((k, n))
    resid = np.diag(Z).copy()
    taken = np.zeros(n, dtype=bool)
    chosen, incs = [], []
    for s in range(k):
        masked = np.where(taken, -np.inf, resid)
        best = int(np.argmax(masked))
        bv = masked[best]
        if not bv > floor:
            break
        chosen.append(best)
        incs.append(bv)
        taken[best] = True
        row = (Z[best] - R[:s, best] @ R[:s]) / np.sqrt(bv)
        R[s] = row
        resid = resid - row * row
    return np.array(chosen, dtype=np.int64), np.array(incs, dtype=float)


multi_source_bfs = dispatch(_multi_source_bfs_jit, _multi_source_bfs_np)
bfs_within = dispatch(_bfs_within_jit, _bfs_within_np)
chebyshev_apply = dispatch(_chebyshev_apply_jit, _chebyshev_apply_np)
ista = dispatch(_ista_jit, _ista_np)
greedy_det = dispatch(_greedy_det_jit, _greedy_det_np)
