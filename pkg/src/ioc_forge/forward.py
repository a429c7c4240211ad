"""Forward LQ solvers: model-based lifted oracle and data-enabled formulations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .lti import HankelBlocks, LtiSystem, Trajectory, simulate
from .matstruct import pseudoinverse

FEAS_RTOL = 1e-6


class InfeasibleInitialTrajectory(ValueError):
    pass


@dataclass(frozen=True)
class LqObjective:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if not np.allclose(Q, Q.T, atol=1e-12) or not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("Q and R must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    def lifted(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """Block-diagonal ``(diag(Q,..,Q), diag(R,..,R))`` over ``N`` steps."""
        return np.kron(np.eye(N), self.Q), np.kron(np.eye(N), self.R)

    def scaled(self, alpha: float) -> "LqObjective":
        return LqObjective(alpha * self.Q, alpha * self.R)


@dataclass(frozen=True)
class ForwardSolution:
    u: np.ndarray
    y: np.ndarray
    cost: float
    g: np.ndarray | None = None


def lifted_maps(sys: LtiSystem, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Gamma, Theta)`` with stacked outputs ``y = Gamma x0 + Theta u``."""
    n, m, p = sys.n, sys.m, sys.p
    Gamma = np.zeros((p * N, n))
    Theta = np.zeros((p * N, m * N))
    Ak = np.eye(n)
    markov = [sys.D]
    for k in range(N):
        Gamma[k * p:(k + 1) * p] = sys.C @ Ak
        if k + 1 < N:
            markov.append(sys.C @ Ak @ sys.B)
        Ak = sys.A @ Ak
    for i in range(N):
        for j in range(i + 1):
            Theta[i * p:(i + 1) * p, j * m:(j + 1) * m] = markov[i - j]
    return Gamma, Theta


def lq_cost(u: np.ndarray, y: np.ndarray, obj: LqObjective) -> float:
    N = u.size // obj.R.shape[0]
    Qb, Rb = obj.lifted(N)
    return float(y @ Qb @ y + u @ Rb @ u)


def lq_oracle(sys: LtiSystem, obj: LqObjective, x0, horizon: int) -> Trajectory:
    """Exact minimizer of the finite-horizon output LQ problem from ``x0``."""
    if horizon < 1:
        raise ValueError("horizon must be positive")
    Gamma, Theta = lifted_maps(sys, horizon)
    Qb, Rb = obj.lifted(horizon)
    x0 = np.asarray(x0, dtype=float).ravel()
    H = Theta.T @ Qb @ Theta + Rb
    u = -sla.solve(H, Theta.T @ Qb @ Gamma @ x0, assume_a="pos")
    return simulate(sys, x0, u.reshape(horizon, sys.m))


def data_enabled_lq(blocks: HankelBlocks, w_ini: Trajectory, obj: LqObjective) -> ForwardSolution:
    """Solve the data-enabled LQ problem over Hankel column combinations ``g``.

    The equality-constrained QP is solved through its KKT system with a
    pseudoinverse; the returned ``g`` is the minimum-norm optimal one.
    """
    if len(w_ini) != blocks.T_ini:
        raise ValueError(f"w_ini must have length T_ini={blocks.T_ini}")
    N = blocks.N
    z_ini = np.concatenate([w_ini.stacked_inputs(), w_ini.stacked_outputs()])
    w_p = blocks.w_p

    g_ls = pseudoinverse(w_p) @ z_ini
    resid = np.linalg.norm(w_p @ g_ls - z_ini)
    if resid > FEAS_RTOL * max(np.linalg.norm(z_ini), 1.0):
        raise InfeasibleInitialTrajectory(
            f"initial trajectory not representable by data (residual {resid:.3e})"
        )

    Qb, Rb = obj.lifted(N)
    P = blocks.U_f.T @ Rb @ blocks.U_f + blocks.Y_f.T @ Qb @ blocks.Y_f
    M, k = blocks.M, w_p.shape[0]
    kkt = np.block([[2 * P, w_p.T], [w_p, np.zeros((k, k))]])
    rhs = np.concatenate([np.zeros(M), z_ini])
    g = (pseudoinverse(kkt) @ rhs)[:M]

    H = blocks.stacked()
    g = pseudoinverse(H) @ (H @ g)
    u = blocks.U_f @ g
    y = blocks.Y_f @ g
    return ForwardSolution(u=u, y=y, g=g, cost=lq_cost(u, y, obj))


def condensed_hessian(K_f: np.ndarray, obj: LqObjective, N: int) -> np.ndarray:
    Qb, Rb = obj.lifted(N)
    return K_f.T @ Qb @ K_f + Rb


def condensed_gradient(K_p: np.ndarray, K_f: np.ndarray, z_ini, u, obj: LqObjective) -> np.ndarray:
    """Gradient of ``J(u) = ||K_p z + K_f u||_Q^2 + ||u||_R^2`` with respect to ``u``."""
    N = K_f.shape[1] // obj.R.shape[0]
    Qb, _ = obj.lifted(N)
    return 2 * condensed_hessian(K_f, obj, N) @ u + 2 * K_f.T @ Qb @ K_p @ np.asarray(z_ini, dtype=float)


def condensed_objective(K_p: np.ndarray, K_f: np.ndarray, z_ini, u, obj: LqObjective) -> float:
    y = K_p @ z_ini + K_f @ u
    return lq_cost(np.asarray(u, dtype=float), y, obj)


def condensed_lq(K_p: np.ndarray, K_f: np.ndarray, z_ini, obj: LqObjective) -> np.ndarray:
    m = obj.R.shape[0]
    if K_f.shape[1] % m:
        raise ValueError("K_f column count must be a multiple of m")
    N = K_f.shape[1] // m
    Hs = condensed_hessian(K_f, obj, N)
    try:
        c = sla.cho_factor(Hs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("condensed Hessian is not positive definite") from exc
    Qb, _ = obj.lifted(N)
    return -sla.cho_solve(c, K_f.T @ Qb @ K_p @ np.asarray(z_ini, dtype=float))
