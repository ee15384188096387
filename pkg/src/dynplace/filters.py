"""Spectral graph filters used as the sensing operator."""
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from . import kernels
from .graph import laplacian, spectrum

KINDS = ("identity", "lowpass-cosine", "custom-spectral-response")


@dataclass(frozen=True)
class FilterSpec:
    """Which spectral response to use and how to apply it.

    ``chebyshev_order`` of 0 means exact application through the
    eigendecomposition. ``response`` is required for the custom kind and
    receives ``(lam, lmax)`` as arrays/float.
    """

    kind: str = "lowpass-cosine"
    chebyshev_order: int = 0
    response: Callable | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}; expected one of {KINDS}")
        if self.chebyshev_order < 0:
            raise ValueError("chebyshev_order must be >= 0")
        if self.kind == "custom-spectral-response" and self.response is None:
            raise ValueError("custom-spectral-response needs a response callable")

    def evaluate(self, lam, lmax):
        lam = np.asarray(lam, dtype=float)
        if self.kind == "identity":
            return np.ones_like(lam)
        if self.kind == "lowpass-cosine":
            return np.cos(0.5 * np.pi * lam / lmax)
        return np.asarray(self.response(lam, lmax), dtype=float) * np.ones_like(lam)


def lowpass_cosine(lam, lmax):
    return np.cos(0.5 * np.pi * np.asarray(lam, dtype=float) / lmax)


def exact_filter_matrix(spec, fspec):
    """``U diag(response(lambda)) U^T``."""
    U = spec.eigenvectors
    h = fspec.evaluate(spec.eigenvalues, spec.lmax)
    G = (U * h) @ U.T
    return 0.5 * (G + G.T)


def estimate_lmax(graph):
    """Largest Laplacian eigenvalue, padded by 1% so the Chebyshev domain covers it."""
    L = laplacian(graph, sparse=True)
    if graph.n_nodes <= 64:
        return float(np.linalg.eigvalsh(L.toarray())[-1]) * 1.01
    val = spla.eigsh(L, k=1, which="LA", return_eigenvectors=False, tol=1e-6)
    return float(val[0]) * 1.01


def chebyshev_coefficients(fspec, lmax, order):
    """Chebyshev projection of the response over ``[0, lmax]``.

    Uses ``order + 1`` Chebyshev-Gauss nodes; returns ``order + 1``
    coefficients with the convention that the zeroth one is halved on use.
    """
    m = order + 1
    theta = np.pi * (np.arange(m) + 0.5) / m
    lam = 0.5 * lmax * (np.cos(theta) + 1.0)
    vals = fspec.evaluate(lam, lmax)
    j = np.arange(m)[:, None]
    return (2.0 / m) * (np.cos(j * theta[None, :]) @ vals)


def chebyshev_filter_apply(graph, fspec, x, lmax=None, order=None):
    """Apply the order-J Chebyshev approximation of the filter to ``x``.

    ``x`` may be a vector or an N x m block. ``lmax`` is both the Chebyshev
    domain bound and the band edge of the response; by default it is exact
    for graphs up to 512 nodes and a padded Lanczos estimate above that.
    """
    J = fspec.chebyshev_order if order is None else order
    if J < 1:
        raise ValueError("chebyshev order must be >= 1")
    if lmax is None:
        lmax = spectrum(graph).lmax if graph.n_nodes <= 512 else estimate_lmax(graph)
    coeffs = chebyshev_coefficients(fspec, lmax, J)
    L = laplacian(graph, sparse=True)
    x = np.asarray(x, dtype=float)
    vec = x.ndim == 1
    X = np.ascontiguousarray(x[:, None] if vec else x)
    out = kernels.chebyshev_apply(
        L.indptr.astype(np.int64), L.indices.astype(np.int64), L.data.astype(float), X, coeffs, float(lmax)
    )
    return out[:, 0] if vec else out


def chebyshev_filter_matrix(graph, fspec, lmax=None, order=None):
    G = chebyshev_filter_apply(graph, fspec, np.eye(graph.n_nodes), lmax=lmax, order=order)
    return 0.5 * (G + G.T)


def sensing_matrix(graph, fspec, exact_max_nodes=512):
    """Dense N x N filter matrix for the selection math.

    Small graphs use the exact spectral filter; larger ones (or a nonzero
    order with ``exact_max_nodes=0``) use the Chebyshev polynomial.
    """
    if fspec.kind == "identity":
        return np.eye(graph.n_nodes)
    if fspec.chebyshev_order == 0 or graph.n_nodes <= exact_max_nodes:
        return exact_filter_matrix(spectrum(graph), fspec)
    return chebyshev_filter_matrix(graph, fspec)
