"""Weight estimates, normalisation and their on-disk document format."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

SOLVER_TAGS = ("noiseless-vanilla", "noisy-vanilla", "noiseless-simplified", "noisy-simplified")

THETA_ORDER = {
    "noiseless-vanilla": "lambda_ini, vech(R), vech(Q)",
    "noisy-vanilla": "lambda_ini, vech(R), vech(Q)",
    "noiseless-simplified": "vech(Q), vech(R)",
    "noisy-simplified": "vech(Q), vech(R)",
}

PSD_TOL = 1e-8


class UnidentifiableError(RuntimeError):
    """Solution set of the homogeneous data equation is not a single ray."""


class InconsistentDataError(RuntimeError):
    """Null vector cannot be signed into a PSD / PD weight pair."""


@dataclass(frozen=True)
class WeightEstimate:
    Q_hat: np.ndarray
    R_hat: np.ndarray
    residual: float
    solver_tag: str
    lambda_ini: np.ndarray | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.solver_tag not in SOLVER_TAGS:
            raise ValueError(f"unknown solver_tag {self.solver_tag!r}")
        if self.residual < 0:
            raise ValueError("residual must be nonnegative")

    def to_dict(self) -> dict:
        d = {
            "solver_tag": self.solver_tag,
            "theta_order": THETA_ORDER[self.solver_tag],
            "Q": self.Q_hat.tolist(),
            "R": self.R_hat.tolist(),
            "residual": self.residual,
        }
        if self.lambda_ini is not None:
            d["lambda_ini"] = self.lambda_ini.tolist()
        if self.alpha is not None:
            d["alpha"] = self.alpha if math.isfinite(self.alpha) else "inf"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WeightEstimate":
        alpha = d.get("alpha")
        lam = d.get("lambda_ini")
        return cls(
            Q_hat=np.atleast_2d(np.array(d["Q"], dtype=float)),
            R_hat=np.atleast_2d(np.array(d["R"], dtype=float)),
            residual=float(d["residual"]),
            solver_tag=d["solver_tag"],
            lambda_ini=None if lam is None else np.array(lam, dtype=float),
            alpha=None if alpha is None else float(alpha),
        )


def write_estimate(est: WeightEstimate, path) -> None:
    with open(path, "w") as fh:
        json.dump(est.to_dict(), fh, indent=2)
        fh.write("\n")


def read_estimate(path) -> WeightEstimate:
    with open(path) as fh:
        return WeightEstimate.from_dict(json.load(fh))


def orient(Q: np.ndarray, R: np.ndarray) -> float:
    """Sign (+1/-1) that makes ``trace(Q) + trace(R)`` positive."""
    return 1.0 if np.trace(Q) + np.trace(R) >= 0 else -1.0


def condition_normalise(Q: np.ndarray, R: np.ndarray) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Scale a PSD/PD pair so that ``lambda_min(diag(Q, R)) == 1``.

    Returns ``(Q, R, alpha, scale)`` where ``alpha`` is the resulting
    ``lambda_max``. Along a single ray this is the minimiser of the
    condition-number program. If ``Q`` is singular the pair is instead
    scaled to ``lambda_max == 1`` and ``alpha`` is infinite.
    """
    Q = 0.5 * (Q + Q.T)
    R = 0.5 * (R + R.T)
    eq = np.linalg.eigvalsh(Q)
    er = np.linalg.eigvalsh(R)
    lmax = max(eq.max(), er.max())
    if er.min() <= PSD_TOL * lmax or eq.min() < -PSD_TOL * lmax:
        raise InconsistentDataError(
            f"estimate is not PSD/PD: min eig Q {eq.min():.3e}, min eig R {er.min():.3e}"
        )
    lmin = min(eq.min(), er.min())
    if lmin <= PSD_TOL * lmax:
        scale = 1.0 / lmax
        return Q * scale, R * scale, math.inf, scale
    scale = 1.0 / lmin
    return Q * scale, R * scale, float(lmax * scale), scale


def project_psd(X: np.ndarray, floor: float = 0.0) -> np.ndarray:
    X = 0.5 * (X + X.T)
    w, V = np.linalg.eigh(X)
    return (V * np.maximum(w, floor)) @ V.T


def stacked_weights(Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    return block_diag(np.atleast_2d(Q), np.atleast_2d(R))
