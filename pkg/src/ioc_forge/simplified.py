"""Simplified data-driven IOC on the condensed predictor (no costate).

Unknowns are ordered ``theta = col(vech(Q), vech(R))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .estimate import UnidentifiableError, WeightEstimate, condition_normalise, orient, project_psd
from .lti import HankelBlocks
from .matstruct import (
    RankReport,
    duplication_matrix,
    numerical_rank,
    pseudoinverse,
    smallest_singular_pair,
    unvech,
    vech,
)
from .vanilla import _id_null, _id_rank

# Relative rank tolerance after column equilibration; the predictor K adds
# round-off that the vanilla matrix does not carry.
ID_RTOL = 1e-6

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CondensedPredictor:
    K_p: np.ndarray
    K_f: np.ndarray
    m: int
    p: int
    T_ini: int
    N: int


@dataclass(frozen=True)
class SimplifiedSystemMatrix:
    phi_tilde: np.ndarray
    y_es: np.ndarray
    m: int
    p: int
    T_ini: int
    N: int

    @property
    def n_weights(self) -> int:
        m, p = self.m, self.p
        return (m * m + m + p * p + p) // 2

    def split(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``theta -> (Q, R)``."""
        nq = self.p * (self.p + 1) // 2
        return unvech(theta[:nq]), unvech(theta[nq:])


def compute_condensed_predictor(blocks: HankelBlocks, tol: float | None = None) -> CondensedPredictor:
    m, p, T_ini, N = blocks.m, blocks.p, blocks.T_ini, blocks.N
    S = np.vstack([blocks.U_p, blocks.Y_p, blocks.U_f])
    if log.isEnabledFor(logging.DEBUG):
        log.debug("rank col(U_p, Y_p, U_f) = %d", numerical_rank(S).numerical_rank)
    K = blocks.Y_f @ pseudoinverse(S, tol)
    k = (m + p) * T_ini
    return CondensedPredictor(K_p=K[:, :k], K_f=K[:, k:], m=m, p=p, T_ini=T_ini, N=N)


def predict_output(cp: CondensedPredictor, z_ini, u) -> np.ndarray:
    return cp.K_f @ np.asarray(u, dtype=float) + cp.K_p @ np.asarray(z_ini, dtype=float)


def simplified_kkt(cp: CondensedPredictor, z_ini, u_tilde, Q, R) -> np.ndarray:
    """``(K_f^T Q_N K_f + R_N) u + K_f^T Q_N K_p z_ini`` evaluated directly."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Qb = np.kron(np.eye(cp.N), Q)
    Rb = np.kron(np.eye(cp.N), R)
    u = np.asarray(u_tilde, dtype=float)
    return (cp.K_f.T @ Qb @ cp.K_f + Rb) @ u + cp.K_f.T @ Qb @ cp.K_p @ np.asarray(z_ini, dtype=float)


def _phi_blocks(K_f: np.ndarray, y: np.ndarray, u: np.ndarray, m: int, p: int, N: int) -> np.ndarray:
    mN = m * N
    Phi_y = np.zeros((mN, p * p))
    Phi_u = np.zeros((mN, m * m))
    I = np.eye(mN)
    for i in range(N):
        Phi_y += np.kron(y[i * p:(i + 1) * p][None, :], K_f[i * p:(i + 1) * p].T)
        Phi_u += np.kron(u[i * m:(i + 1) * m][None, :], I[:, i * m:(i + 1) * m])
    return np.hstack([Phi_y @ duplication_matrix(p), Phi_u @ duplication_matrix(m)])


def assemble_phi_tilde(cp: CondensedPredictor, z_ini, u_tilde) -> SimplifiedSystemMatrix:
    m, p, N = cp.m, cp.p, cp.N
    u = np.asarray(u_tilde, dtype=float).ravel()
    z = np.asarray(z_ini, dtype=float).ravel()
    if u.size != m * N or z.size != cp.K_p.shape[1]:
        raise ValueError(f"expected u_tilde of length {m * N} and z_ini of length {cp.K_p.shape[1]}")
    y_es = predict_output(cp, z, u)
    return SimplifiedSystemMatrix(_phi_blocks(cp.K_f, y_es, u, m, p, N), y_es, m, p, cp.T_ini, N)


def check_identifiability_simplified(sm: SimplifiedSystemMatrix, tol: float | None = None) -> tuple[bool, RankReport]:
    rep = _id_rank(sm.phi_tilde, ID_RTOL, tol)
    return rep.numerical_rank == sm.n_weights - 1, rep


def horizon_threshold(m: int, p: int) -> float:
    return (m * m + m + p * p + p) / (2 * m) - 1 / m


def check_horizon(m: int, p: int, N: int) -> bool:
    """False when the post-split horizon ``N`` is too short to identify (Q, R)."""
    if min(m, p, N) < 1:
        raise ValueError("dimensions must be positive")
    return not N < horizon_threshold(m, p)


def solve_noiseless_simplified(sm: SimplifiedSystemMatrix, tol: float | None = None) -> WeightEstimate:
    M = sm.phi_tilde
    basis = _id_null(M, ID_RTOL, tol)
    if len(basis) != 1:
        raise UnidentifiableError(f"null space has dimension {len(basis)}, expected 1")
    theta = basis[0]
    Q, R = sm.split(theta)
    sgn = orient(Q, R)
    Q, R, alpha, _ = condition_normalise(sgn * Q, sgn * R)
    return WeightEstimate(
        Q_hat=Q, R_hat=R, alpha=alpha,
        residual=float(np.linalg.norm(M @ theta)), solver_tag="noiseless-simplified",
    )


def solve_noisy_simplified(sm: SimplifiedSystemMatrix, psd_project: bool = False) -> WeightEstimate:
    """Minimise ``||phi_tilde theta||`` over unit ``theta``."""
    theta, sigma = smallest_singular_pair(sm.phi_tilde)
    Q, R = sm.split(theta)
    sgn = orient(Q, R)
    Q, R = sgn * Q, sgn * R
    if psd_project:
        Q, R = project_psd(Q), project_psd(R)
    return WeightEstimate(Q_hat=Q, R_hat=R, residual=sigma, solver_tag="noisy-simplified")


def theta_simplified(Q, R) -> np.ndarray:
    return np.concatenate([vech(np.atleast_2d(Q)), vech(np.atleast_2d(R))])
