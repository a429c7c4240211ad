"""First-order sensitivity of the simplified noisy estimate to input errors."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .simplified import (
    CondensedPredictor,
    SimplifiedSystemMatrix,
    _phi_blocks,
    assemble_phi_tilde,
    theta_simplified,
)

GAP_RTOL = 1e-10


class EigenGapError(ValueError):
    pass


@dataclass(frozen=True)
class PerturbationReport:
    bound: float
    sigma_gap: float
    eigvals: np.ndarray
    correction: np.ndarray
    actual_deviation: float | None = None

    @property
    def ratio(self) -> float | None:
        if self.actual_deviation is None or self.bound == 0:
            return None
        return self.actual_deviation / self.bound


def delta_phi_tilde(cp: CondensedPredictor, delta_u) -> np.ndarray:
    """Change of ``phi_tilde`` when the online inputs move by ``delta_u``.

    ``z_ini`` is held fixed, so the predicted outputs shift by ``K_f delta_u``.
    """
    du = np.asarray(delta_u, dtype=float).ravel()
    if du.size != cp.m * cp.N:
        raise ValueError(f"delta_u must have length {cp.m * cp.N}")
    return _phi_blocks(cp.K_f, cp.K_f @ du, du, cp.m, cp.p, cp.N)


def _smallest_eigvec(G: np.ndarray) -> np.ndarray:
    _, V = np.linalg.eigh(G)
    return V[:, 0]


def perturbation_bound(sm: SimplifiedSystemMatrix, dphi: np.ndarray, Q=None, R=None) -> PerturbationReport:
    """First-order eigenvector correction for the smallest eigenpair of ``phi^T phi``.

    ``v' - v ~ sum_i [v_i^T dG v / (sigma - sigma_i)] v_i`` with
    ``dG = dphi^T phi + phi^T dphi``; the bound is its norm. If the true
    weights are given, the sign-aligned distance between the normalised
    truth and the perturbed estimate is returned as ``actual_deviation``.
    """
    Phi = sm.phi_tilde
    G = Phi.T @ Phi
    w, V = np.linalg.eigh(G)
    sigma, v = w[0], V[:, 0]
    gaps = w[1:] - sigma
    gap = float(gaps.min()) if gaps.size else np.inf
    if gaps.size and gap <= GAP_RTOL * max(w[-1], np.finfo(float).tiny):
        raise EigenGapError(f"smallest eigenvalue is not simple (gap {gap:.3e})")
    dG = dphi.T @ Phi + Phi.T @ dphi
    coeff = (V[:, 1:].T @ dG @ v) / (sigma - w[1:])
    corr = V[:, 1:] @ coeff
    actual = None
    if Q is not None and R is not None:
        truth = theta_simplified(Q, R)
        truth = truth / np.linalg.norm(truth)
        vp = _smallest_eigvec((Phi + dphi).T @ (Phi + dphi))
        actual = float(min(np.linalg.norm(vp - truth), np.linalg.norm(vp + truth)))
    return PerturbationReport(
        bound=float(np.linalg.norm(corr)), sigma_gap=gap, eigvals=w, correction=corr,
        actual_deviation=actual,
    )


@dataclass(frozen=True)
class PerturbationRow:
    epsilon: float
    direction_seed: int
    bound: float
    actual: float
    ratio: float


def direction_study(cp: CondensedPredictor, z_ini, u_tilde, Q, R, epsilons, n_directions: int = 50,
                    seed: int = 0) -> list[PerturbationRow]:
    """Bound vs. actual deviation for random unit directions of ``delta_u``.

    Each direction is scaled to ``epsilon * ||u_tilde||``; ``phi_tilde`` is
    re-assembled at the perturbed input so the actual deviation carries all
    higher-order terms.
    """
    u = np.asarray(u_tilde, dtype=float).ravel()
    sm = assemble_phi_tilde(cp, z_ini, u)
    rows = []
    for k in range(n_directions):
        rng = np.random.default_rng([seed, k])
        d = rng.standard_normal(u.size)
        d /= np.linalg.norm(d)
        for eps in epsilons:
            du = eps * np.linalg.norm(u) * d
            dphi = assemble_phi_tilde(cp, z_ini, u + du).phi_tilde - sm.phi_tilde
            rep = perturbation_bound(sm, dphi, Q, R)
            ratio = rep.ratio if rep.ratio is not None else float("nan")
            rows.append(PerturbationRow(float(eps), k, rep.bound, float(rep.actual_deviation), ratio))
    return rows


def rows_to_csv(rows: list[PerturbationRow]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["epsilon", "direction_seed", "bound", "actual", "ratio"])
    for r in rows:
        wr.writerow([f"{r.epsilon:.17g}", r.direction_seed, f"{r.bound:.17g}", f"{r.actual:.17g}", f"{r.ratio:.17g}"])
    return buf.getvalue()
