"""LTI simulation, trajectories, Hankel construction and excitation checks."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matstruct import RankReport, numerical_rank

log = logging.getLogger(__name__)

CHANNELS = ("inputs", "outputs", "both")


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    lag_bound: int | None = None

    def __post_init__(self):
        A, B, C, D = (np.atleast_2d(np.asarray(X, dtype=float)) for X in (self.A, self.B, self.C, self.D))
        n, m, p = A.shape[0], B.shape[1], C.shape[0]
        if A.shape != (n, n) or B.shape != (n, m) or C.shape != (p, n) or D.shape != (p, m):
            raise ValueError(
                f"incompatible shapes A{A.shape} B{B.shape} C{C.shape} D{D.shape}"
            )
        lag = n if self.lag_bound is None else int(self.lag_bound)
        if not 1 <= lag <= n:
            raise ValueError(f"lag_bound must lie in [1, n={n}], got {lag}")
        for name, X in zip("ABCD", (A, B, C, D)):
            object.__setattr__(self, name, X)
        object.__setattr__(self, "lag_bound", lag)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


def double_integrator() -> LtiSystem:
    """The two-state double integrator with full state output."""
    return LtiSystem(
        A=np.array([[1.0, 1.0], [0.0, 1.0]]),
        B=np.array([[0.0], [1.0]]),
        C=np.eye(2),
        D=np.zeros((2, 1)),
    )


@dataclass(frozen=True)
class Trajectory:
    """Paired input/output samples; ``inputs`` is (T, m), ``outputs`` is (T, p)."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if u.shape[0] != y.shape[0]:
            raise ValueError(f"inputs ({u.shape[0]}) and outputs ({y.shape[0]}) differ in length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise ValueError("trajectory contains non-finite entries")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def p(self) -> int:
        return self.outputs.shape[1]

    def stacked_inputs(self) -> np.ndarray:
        return self.inputs.ravel()

    def stacked_outputs(self) -> np.ndarray:
        return self.outputs.ravel()

    def interleaved(self) -> np.ndarray:
        """(T, m+p) samples ``w_k = col(u_k, y_k)``."""
        return np.hstack([self.inputs, self.outputs])

    def concat(self, other: "Trajectory") -> "Trajectory":
        return Trajectory(np.vstack([self.inputs, other.inputs]), np.vstack([self.outputs, other.outputs]))


@dataclass(frozen=True)
class HankelBlocks:
    U_p: np.ndarray
    Y_p: np.ndarray
    U_f: np.ndarray
    Y_f: np.ndarray
    T_ini: int
    N: int
    m: int = field(default=0)
    p: int = field(default=0)

    @property
    def M(self) -> int:
        return self.U_p.shape[1]

    @property
    def w_p(self) -> np.ndarray:
        return np.vstack([self.U_p, self.Y_p])

    def stacked(self) -> np.ndarray:
        return np.vstack([self.U_p, self.Y_p, self.U_f, self.Y_f])


def simulate(sys: LtiSystem, x0, inputs) -> Trajectory:
    u = np.asarray(inputs, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, sys.m) if sys.m > 1 else u[:, None]
    if u.ndim != 2 or u.shape[1] != sys.m:
        raise ValueError(f"inputs must have {sys.m} columns, got shape {u.shape}")
    x = np.asarray(x0, dtype=float).ravel()
    if x.size != sys.n:
        raise ValueError(f"x0 must have length {sys.n}, got {x.size}")
    y = np.empty((u.shape[0], sys.p))
    for k, uk in enumerate(u):
        y[k] = sys.C @ x + sys.D @ uk
        x = sys.A @ x + sys.B @ uk
    return Trajectory(u, y)


def random_excitation(m: int, T: int, amplitude: float = 1.0, seed: int = 0) -> np.ndarray:
    if T < 1:
        raise ValueError("T must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(-amplitude, amplitude, size=(T, m))


def hankel(signal, L: int) -> np.ndarray:
    """Block Hankel matrix of depth ``L``; column ``j`` stacks ``signal[j:j+L]``."""
    s = np.asarray(signal, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    T = s.shape[0]
    if not 1 <= L <= T:
        raise ValueError(f"need 1 <= L <= T, got L={L}, T={T}")
    cols = T - L + 1
    return np.vstack([s[i:i + cols].T for i in range(L)])


def is_persistently_exciting(u, L: int, tol: float | None = None) -> bool:
    H = hankel(u, L)
    return numerical_rank(H, tol).numerical_rank == H.shape[0]


def check_generalized_pe(w: Trajectory, L: int, n: int, tol: float | None = None) -> tuple[bool, RankReport]:
    """Rank test ``rank H_L(w) == m L + n`` on the interleaved Hankel matrix."""
    H = hankel(w.interleaved(), L)
    rep = numerical_rank(H, tol)
    return rep.numerical_rank == w.m * L + n, rep


def split_trajectory(w: Trajectory, T_ini: int) -> tuple[Trajectory, Trajectory]:
    if not 1 <= T_ini < len(w):
        raise ValueError(f"need 1 <= T_ini < length ({len(w)}), got {T_ini}")
    return (
        Trajectory(w.inputs[:T_ini], w.outputs[:T_ini]),
        Trajectory(w.inputs[T_ini:], w.outputs[T_ini:]),
    )


def build_hankel_blocks(w_d: Trajectory, T_ini: int, N: int, n: int | None = None) -> HankelBlocks:
    L = T_ini + N
    if len(w_d) < L:
        raise ValueError(f"trajectory of length {len(w_d)} too short for T_ini+N={L}")
    m, p = w_d.m, w_d.p
    Hu = hankel(w_d.inputs, L)
    Hy = hankel(w_d.outputs, L)
    if n is not None:
        ok, rep = check_generalized_pe(w_d, L, n)
        if not ok:
            log.warning("generalized PE fails: rank %d != %d", rep.numerical_rank, m * L + n)
    return HankelBlocks(
        U_p=Hu[: m * T_ini], U_f=Hu[m * T_ini:],
        Y_p=Hy[: p * T_ini], Y_f=Hy[p * T_ini:],
        T_ini=T_ini, N=N, m=m, p=p,
    )


def snr_to_noise_variance(signal_power: float, snr_db: float) -> float:
    return signal_power / 10.0 ** (snr_db / 10.0)


def add_observation_noise(w: Trajectory, snr_db: float, seed: int = 0, channels: str = "outputs") -> Trajectory:
    """Gaussian observation noise with per-channel power ratio ``snr_db``.

    ``snr_db = inf`` returns the trajectory unchanged.
    """
    if channels not in CHANNELS:
        raise ValueError(f"channels must be one of {CHANNELS}")
    if math.isinf(snr_db) and snr_db > 0:
        return w
    rng = np.random.default_rng(seed)

    def noisy(x: np.ndarray) -> np.ndarray:
        power = np.mean(x ** 2, axis=0)
        if np.any(power == 0):
            raise ValueError("cannot set SNR on a zero-power channel")
        std = np.sqrt(snr_to_noise_variance(power, snr_db))
        return x + rng.standard_normal(x.shape) * std

    u, y = w.inputs, w.outputs
    if channels in ("inputs", "both"):
        u = noisy(u)
    if channels in ("outputs", "both"):
        y = noisy(y)
    return Trajectory(u, y)


def write_trajectory_csv(w: Trajectory, path) -> None:
    header = ["k"] + [f"u_{i}" for i in range(w.m)] + [f"y_{i}" for i in range(w.p)]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for k in range(len(w)):
            wr.writerow([k] + [f"{v:.17g}" for v in np.concatenate([w.inputs[k], w.outputs[k]])])


def read_trajectory_csv(path) -> Trajectory:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trajectory file")
    header = rows[0]
    ucols = [i for i, h in enumerate(header) if h.startswith("u_")]
    ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if header[0] != "k" or not ucols or not ycols:
        raise ValueError(f"{path}: header must be k,u_0..,y_0.., got {header}")
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    return Trajectory(data[:, ucols], data[:, ycols])
