"""Structural matrix helpers: half-vectorization, duplication matrices and
SVD-based rank / null-space tools.

All matrices are dense numpy arrays. ``vec`` is column-major throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SYM_RTOL = 1e-10
SIGN_EPS = 1e-12


@dataclass(frozen=True)
class RankReport:
    numerical_rank: int
    singular_values: np.ndarray
    tolerance_used: float

    @property
    def sigma_max(self) -> float:
        return float(self.singular_values[0]) if self.singular_values.size else 0.0


def default_tolerance(M: np.ndarray, s: np.ndarray | None = None) -> float:
    """``max(rows, cols) * eps * sigma_max``."""
    if s is None:
        s = np.linalg.svd(M, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    return max(M.shape) * np.finfo(float).eps * smax


def _check_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.max(np.abs(M - M.T), initial=0.0) > SYM_RTOL * scale:
        raise ValueError("matrix is not symmetric")
    return M


def vec(M: np.ndarray) -> np.ndarray:
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def vech(M: np.ndarray) -> np.ndarray:
    """Stack the lower triangle of a symmetric matrix column by column."""
    M = _check_symmetric(M)
    n = M.shape[0]
    return np.concatenate([M[j:, j] for j in range(n)])


def unvech(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    n = vech_order(v.size)
    M = np.zeros((n, n))
    pos = 0
    for j in range(n):
        M[j:, j] = v[pos:pos + n - j]
        pos += n - j
    return M + np.tril(M, -1).T


def vech_order(length: int) -> int:
    """Matrix order n such that n(n+1)/2 == length."""
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if n * (n + 1) // 2 != length:
        raise ValueError(f"{length} is not a triangular number")
    return n


def duplication_matrix(m: int) -> np.ndarray:
    """Duplication matrix ``D_m`` with ``D_m @ vech(S) == vec(S)``.

    Built from the explicit sum over ``i >= j`` of ``tau_ij vec(T_ij)^T``,
    where ``tau_ij`` has its 1 at (1-based) position
    ``(j-1) m + i - j (j-1) / 2``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    D = np.zeros((m * m, m * (m + 1) // 2))
    for j in range(1, m + 1):
        for i in range(j, m + 1):
            pos = (j - 1) * m + i - j * (j - 1) // 2 - 1
            # vec(T_ij) has ones at the column-major slots of (i,j) and (j,i)
            D[(j - 1) * m + (i - 1), pos] = 1.0
            D[(i - 1) * m + (j - 1), pos] = 1.0
    return D


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def numerical_rank(M: np.ndarray, tol: float | None = None) -> RankReport:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return RankReport(0, np.zeros(0), 0.0 if tol is None else float(tol))
    s = np.linalg.svd(M, compute_uv=False)
    if tol is None:
        tol = default_tolerance(M, s)
    return RankReport(int(np.sum(s > tol)), s, float(tol))


def _fix_sign(v: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(v) > SIGN_EPS)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def smallest_singular_pair(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Unit right singular vector for the smallest singular value of ``M``.

    For wide matrices the smallest singular value is taken as 0 (the
    right null space is nontrivial), consistent with ``min ||M v||``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] < 1:
        raise ValueError("M must have at least one column")
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    v = _fix_sign(Vt[-1].copy())
    sigma = float(s[-1]) if M.shape[0] >= M.shape[1] else 0.0
    return v, sigma


def pseudoinverse(M: np.ndarray, tol: float | None = None) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros(M.shape[::-1])
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if tol is None:
        tol = default_tolerance(M, s)
    keep = s > tol
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def null_space_basis(M: np.ndarray, tol: float | None = None) -> list[np.ndarray]:
    """Orthonormal basis of the numerical right null space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    if tol is None:
        tol = default_tolerance(M, s)
    rank = int(np.sum(s > tol))
    return [_fix_sign(Vt[k].copy()) for k in range(rank, M.shape[1])]


def row_space_basis(M: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Columns form an orthonormal basis of the row space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    if tol is None:
        tol = default_tolerance(M, s)
    rank = int(np.sum(s > tol))
    return Vt[:rank].T


def equilibrate_columns(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale columns to unit 2-norm; zero columns are left untouched.

    Returns ``(M / c, c)``. Rank is unchanged and a null vector ``v`` of the
    scaled matrix maps back as ``v / c``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    c = np.linalg.norm(M, axis=0)
    c[c == 0] = 1.0
    return M / c, c
