"""Perron root and right eigenvector of small nonnegative matrices."""
from __future__ import annotations

import numpy as np

REL_TOL = 1e-12
MAX_ITER = 100_000


class PerronConvergenceError(RuntimeError):
    pass


def _iterate(M: np.ndarray, max_iter: int, tol: float):
    """Power iteration with Collatz-Wielandt bracketing of the Perron root.

    For a positive vector ``r``, ``min_i (Mr)_i / r_i <= rho(M) <= max_i (Mr)_i / r_i``,
    so the stopping test bounds the eigenvalue error directly.
    """
    r = np.ones(M.shape[0])
    for it in range(max_iter):
        y = M @ r
        if np.any(y <= 0):
            return None, None, it
        ratios = y / r
        lo, hi = ratios.min(), ratios.max()
        r = y / y.max()
        if hi - lo <= tol * hi:
            return 0.5 * (lo + hi), r, it
    return None, None, max_iter


def perron_eigenpair(matrix, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> tuple[float, np.ndarray]:
    """Spectral radius ``chi`` and positive right eigenvector (unit max-norm).

    Falls back to iterating on ``M + c I`` (same eigenvector, root shifted by
    ``c``) when plain iteration stalls, which handles periodic patterns.
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if np.any(M < 0) or not np.all(np.isfinite(M)):
        raise ValueError("matrix must be nonnegative and finite")
    if M.shape[0] == 1:
        return float(M[0, 0]), np.ones(1)

    budget = max_iter // 10
    chi, r, _ = _iterate(M, budget, tol)
    if chi is None:
        shift = float(np.max(M.sum(axis=1)))
        chi, r, _ = _iterate(M + shift * np.eye(M.shape[0]), max_iter - budget, tol * 0.5)
        if chi is None:
            raise PerronConvergenceError("power iteration did not converge")
        chi -= shift
    # one more multiplication removes the lag between r and chi
    y = M @ r
    r = y / y.max()
    return float(chi), r


def normalize_eigenvector(r, weights) -> np.ndarray:
    """Scale ``r`` so that its mean under ``weights`` is exactly 1."""
    r = np.asarray(r, dtype=float)
    w = np.asarray(weights, dtype=float)
    total = float(w @ r)
    if not total > 0:
        raise ValueError("weighted sum of the eigenvector is not positive")
    return r / total
