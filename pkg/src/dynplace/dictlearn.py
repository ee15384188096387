"""Online dictionary learning over a sliding window of reconstructed signals.

One call to :func:`learn_step` per time step: a closed-form dictionary update
with the coefficients held fixed, then ISTA on the coefficients with the new
dictionary held fixed.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


@dataclass
class LearnerState:
    dictionary: np.ndarray  # N x D
    coefficients: np.ndarray  # D x D
    window: np.ndarray  # N x D, newest column last
    initial_dictionary: np.ndarray | None = None
    mu: float = 1.0
    eta: float = 3.0
    gamma: float = 1e-4
    epsilon: float = 1e-8
    max_iters: int = 1000
    last_iters: int = 0
    last_gamma: float = float("nan")
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.dictionary = np.array(self.dictionary, dtype=float)
        self.coefficients = np.array(self.coefficients, dtype=float)
        self.window = np.array(self.window, dtype=float)
        N, D = self.dictionary.shape
        if self.coefficients.shape != (D, D):
            raise ValueError(f"coefficients must be {D}x{D}")
        if self.window.shape != (N, D):
            raise ValueError(f"window must be {N}x{D}")
        if self.initial_dictionary is None:
            self.initial_dictionary = self.dictionary.copy()

    @classmethod
    def initialize(cls, X0, width, **params):
        """Dictionary from the leading left singular vectors of ``X0``.

        ``X0`` holds the training signals as columns; its last ``width``
        columns seed the window, and the coefficients start at all-ones.
        """
        X0 = np.asarray(X0, dtype=float)
        if X0.shape[1] < width:
            raise ValueError(f"need at least {width} training signals, got {X0.shape[1]}")
        A0 = svd_dictionary(X0, width, truncate=False)
        return cls(A0, np.ones((width, width)), X0[:, -width:], **params)

    def push(self, x):
        """Slide the window: drop the oldest column, append ``x``."""
        self.window = np.column_stack([self.window[:, 1:], x])


def svd_dictionary(X, width, truncate=True, rtol=1e-10):
    """Leading left singular vectors of ``X``.

    With ``truncate`` the width is capped at the numerical rank (singular
    values above ``rtol`` times the largest).
    """
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if width > U.shape[1]:
        raise ValueError(f"cannot take {width} singular vectors from rank-{U.shape[1]} data")
    if truncate:
        rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
        width = max(1, min(width, rank))
    return U[:, :width].copy()


def update_dictionary(A_prev, X, C, eta):
    """``(eta A_prev + X C^T)(eta I + C C^T)^{-1}``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    D = C.shape[0]
    lhs = eta * np.eye(D) + C @ C.T
    rhs = eta * A_prev + X @ C.T
    # lhs is symmetric positive definite; solve lhs Y^T = rhs^T
    return np.linalg.solve(lhs, rhs.T).T


def soft_threshold(M, theta):
    if theta < 0:
        raise ValueError("threshold must be >= 0")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - theta, 0.0)


def sparse_objective(A, X, C, mu):
    """``||X - A C||_F^2 + mu ||C||_1``."""
    return float(np.sum((X - A @ C) ** 2) + mu * np.abs(C).sum())


def full_objective(A, C, X, A_prev, mu, eta):
    return sparse_objective(A, X, C, mu) + eta * float(np.sum((A - A_prev) ** 2))


def safe_step(A, gamma):
    """Cap ``gamma`` at ``1 / (2 lambda_max(A^T A))``.

    The gradient of ``||X - AC||^2`` is ``2 A^T (AC - X)``, whose Lipschitz
    constant is twice the top eigenvalue; this cap keeps every ISTA step a
    descent step.
    """
    top = float(np.linalg.eigvalsh(A.T @ A)[-1]) if A.size else 0.0
    if top <= 0:
        return gamma
    return min(gamma, 0.5 / top)


def ista(A, X, C0, gamma, mu, epsilon=1e-8, max_iters=1000, history=False):
    """Run ISTA from ``C0``; returns ``(C, n_iter)`` or ``(C, n_iter, objective)``.

    Stops once the squared Frobenius change between iterates drops below
    ``epsilon`` or after ``max_iters`` iterations.
    """
    A = np.ascontiguousarray(A, dtype=float)
    X = np.ascontiguousarray(X, dtype=float)
    C0 = np.ascontiguousarray(C0, dtype=float)
    hist = np.full(max_iters + 1 if history else 0, np.nan)
    C, n = kernels.ista(A, X, C0, float(gamma), float(mu), float(epsilon), np.int64(max_iters), hist)
    if history:
        return C, int(n), hist[: n + 1]
    return C, int(n)


def update_coefficients(state, A=None):
    A = state.dictionary if A is None else A
    gamma = safe_step(A, state.gamma)
    C, n = ista(A, state.window, state.coefficients, gamma, state.mu, state.epsilon, state.max_iters)
    state.last_iters = n
    state.last_gamma = gamma
    if n >= state.max_iters:
        msg = f"ISTA hit max_iters={state.max_iters} without reaching epsilon={state.epsilon}"
        state.warnings.append(msg)
        log.debug(msg)
    return C


def learn_step(state, t):
    """One alternation at time ``t`` (1-based); returns the new dictionary."""
    if t == 1:
        A = state.initial_dictionary.copy()
    else:
        A = update_dictionary(state.dictionary, state.window, state.coefficients, state.eta)
    C = update_coefficients(state, A)
    state.dictionary = A
    state.coefficients = C
    return A
