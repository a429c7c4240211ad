"""Vanilla data-driven IOC: costate-augmented KKT system over Hankel data.

Unknowns are ordered ``theta = col(lambda_ini, vech(R), vech(Q))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimate import (
    UnidentifiableError,
    WeightEstimate,
    condition_normalise,
    orient,
    project_psd,
)
from .lti import HankelBlocks
from .matstruct import (
    RankReport,
    duplication_matrix,
    equilibrate_columns,
    null_space_basis,
    numerical_rank,
    row_space_basis,
    smallest_singular_pair,
    unvech,
    vech,
)

# Relative rank tolerance (x sigma_max) for identifiability tests, applied
# after column equilibration.
ID_RTOL = 1e-8


@dataclass(frozen=True)
class VanillaSystemMatrix:
    psi_tilde: np.ndarray
    m: int
    p: int
    T_ini: int
    N: int

    @property
    def M(self) -> int:
        return self.psi_tilde.shape[0]

    @property
    def n_costate(self) -> int:
        return (self.m + self.p) * self.T_ini

    @property
    def n_weights(self) -> int:
        m, p = self.m, self.p
        return (m * m + m + p * p + p) // 2

    @property
    def n_unknowns(self) -> int:
        return self.n_costate + self.n_weights

    def split(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``theta -> (lambda_ini, R, Q)``."""
        k = self.n_costate
        nr = self.m * (self.m + 1) // 2
        return theta[:k], unvech(theta[k:k + nr]), unvech(theta[k + nr:])

    def costate_reduction(self, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Restrict ``lambda_ini`` to the row space of ``w_p``.

        Directions of ``lambda_ini`` in the null space of ``w_p^T`` solve the
        data equation with ``Q = R = 0``; they are removed here. Returns the
        reduced matrix and the costate basis ``V`` (``lambda_ini = V mu``).
        """
        W = self.psi_tilde[:, :self.n_costate]
        if tol is None:
            tol = _id_tol(W)
        V = row_space_basis(W, tol)
        reduced = np.hstack([W @ V, self.psi_tilde[:, self.n_costate:]])
        return reduced, V


def _id_tol(M: np.ndarray, rtol: float = ID_RTOL) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    return rtol * float(s[0]) if s.size else 0.0


def _id_rank(M: np.ndarray, rtol: float, tol: float | None) -> RankReport:
    Me, _ = equilibrate_columns(M)
    return numerical_rank(Me, _id_tol(Me, rtol) if tol is None else tol)


def _id_null(M: np.ndarray, rtol: float, tol: float | None) -> list[np.ndarray]:
    Me, c = equilibrate_columns(M)
    basis = null_space_basis(Me, _id_tol(Me, rtol) if tol is None else tol)
    return [v / c / np.linalg.norm(v / c) for v in basis]


def kkt_residual_vanilla(blocks: HankelBlocks, u_tilde, y_tilde, Q, R, lambda_ini) -> np.ndarray:
    """``w_p^T lambda_ini + 2 U_f^T (R_N u) + 2 Y_f^T (Q_N y)`` evaluated directly."""
    N = blocks.N
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Qb = np.kron(np.eye(N), Q)
    Rb = np.kron(np.eye(N), R)
    return (
        blocks.w_p.T @ np.asarray(lambda_ini, dtype=float)
        + 2 * blocks.U_f.T @ (Rb @ np.asarray(u_tilde, dtype=float))
        + 2 * blocks.Y_f.T @ (Qb @ np.asarray(y_tilde, dtype=float))
    )


def _block_kron_sum(F: np.ndarray, x: np.ndarray, q: int) -> np.ndarray:
    """``sum_i x_i^T kron F_i^T`` with ``F_i`` the i-th q-row block of ``F``."""
    N = F.shape[0] // q
    out = np.zeros((F.shape[1], q * q))
    for i in range(N):
        xi = x[i * q:(i + 1) * q]
        out += np.kron(xi[None, :], F[i * q:(i + 1) * q].T)
    return out


def assemble_psi_tilde(blocks: HankelBlocks, u_tilde, y_tilde) -> VanillaSystemMatrix:
    m, p, N = blocks.m, blocks.p, blocks.N
    u_tilde = np.asarray(u_tilde, dtype=float).ravel()
    y_tilde = np.asarray(y_tilde, dtype=float).ravel()
    if u_tilde.size != m * N or y_tilde.size != p * N:
        raise ValueError(f"expected u_tilde of length {m * N} and y_tilde of length {p * N}")
    U_tilde = 2 * _block_kron_sum(blocks.U_f, u_tilde, m)
    Y_tilde = 2 * _block_kron_sum(blocks.Y_f, y_tilde, p)
    psi = np.hstack([blocks.w_p.T, U_tilde @ duplication_matrix(m), Y_tilde @ duplication_matrix(p)])
    return VanillaSystemMatrix(psi, m, p, blocks.T_ini, N)


def assemble_psi_full(blocks: HankelBlocks, u_tilde, y_tilde) -> np.ndarray:
    """Pre-duplication Kronecker matrix ``(1^T u^T y^T) kron (w_p^T 2U_f^T 2Y_f^T)``.

    Acts on ``vec(diag(diag(lambda_ini), R_N, Q_N))``; only for debugging.
    """
    k = (blocks.m + blocks.p) * blocks.T_ini
    row = np.concatenate([np.ones(k), np.ravel(u_tilde), np.ravel(y_tilde)])[None, :]
    right = np.hstack([blocks.w_p.T, 2 * blocks.U_f.T, 2 * blocks.Y_f.T])
    return np.kron(row, right)


def fit_costate(blocks: HankelBlocks, u_tilde, y_tilde, Q, R) -> np.ndarray:
    """Least-squares ``lambda_ini`` for given weights."""
    rest = kkt_residual_vanilla(blocks, u_tilde, y_tilde, Q, R, np.zeros(blocks.w_p.shape[0]))
    lam, *_ = np.linalg.lstsq(blocks.w_p.T, -rest, rcond=None)
    return lam


def check_identifiability_vanilla(
    sm: VanillaSystemMatrix, literal: bool = False, tol: float | None = None
) -> tuple[bool, RankReport]:
    """Rank test for a one-dimensional solution ray.

    Ranks are taken on the column-equilibrated matrix.
    ``literal=True`` compares ``rank(psi_tilde)`` with ``n_unknowns - 1``.
    This can only hold when ``w_p`` has full row rank. The default first
    removes the costate directions annihilated by ``w_p^T`` and applies
    the same count to the reduced matrix.
    """
    if literal:
        M = sm.psi_tilde
    else:
        M, _ = sm.costate_reduction()
    rep = _id_rank(M, ID_RTOL, tol)
    return rep.numerical_rank == M.shape[1] - 1, rep


def _finish(sm, theta, V, residual, tag, normalise):
    mu_len = V.shape[1]
    lam = V @ theta[:mu_len]
    full = np.concatenate([lam, theta[mu_len:]])
    _, R, Q = sm.split(full)
    s = orient(Q, R)
    Q, R, lam = s * Q, s * R, s * lam
    alpha = None
    if normalise:
        Q, R, alpha, scale = condition_normalise(Q, R)
        lam = lam * scale
    return WeightEstimate(Q_hat=Q, R_hat=R, lambda_ini=lam, alpha=alpha, residual=residual, solver_tag=tag)


def solve_noiseless_vanilla(sm: VanillaSystemMatrix, tol: float | None = None) -> WeightEstimate:
    """Exact recovery from the one-dimensional null space.

    On a single ray the condition-number program is solved by scaling the
    null vector so the smallest eigenvalue of ``diag(Q, R)`` equals one.
    """
    reduced, V = sm.costate_reduction()
    basis = _id_null(reduced, ID_RTOL, tol)
    if len(basis) != 1:
        raise UnidentifiableError(f"null space has dimension {len(basis)}, expected 1")
    theta = basis[0]
    residual = float(np.linalg.norm(reduced @ theta))
    return _finish(sm, theta, V, residual, "noiseless-vanilla", normalise=True)


def solve_noisy_vanilla(
    sm: VanillaSystemMatrix, reduce_costate: bool = True, psd_project: bool = False
) -> WeightEstimate:
    """Unit-norm least-squares solution: smallest right singular vector.

    With ``reduce_costate`` the costate is constrained to the row space of
    ``w_p`` (norm-preserving), so that pure-costate null directions cannot
    absorb the solution.
    """
    if reduce_costate:
        M, V = sm.costate_reduction()
    else:
        M, V = sm.psi_tilde, np.eye(sm.n_costate)
    theta, sigma = smallest_singular_pair(M)
    est = _finish(sm, theta, V, sigma, "noisy-vanilla", normalise=False)
    if psd_project:
        est = WeightEstimate(
            Q_hat=project_psd(est.Q_hat), R_hat=project_psd(est.R_hat),
            lambda_ini=est.lambda_ini, residual=est.residual, solver_tag=est.solver_tag,
        )
    return est


def theta_vanilla(lambda_ini, Q, R) -> np.ndarray:
    return np.concatenate([np.ravel(lambda_ini), vech(np.atleast_2d(R)), vech(np.atleast_2d(Q))])
