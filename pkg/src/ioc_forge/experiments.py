"""Reproduction layer: error metric, trial generation and the three sweeps."""
from __future__ import annotations

import csv
import functools
import io
import json
import logging
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag

from .config import RunConfig
from .estimate import InconsistentDataError, UnidentifiableError, WeightEstimate
from .forward import lq_oracle
from .lti import (
    HankelBlocks,
    Trajectory,
    add_observation_noise,
    build_hankel_blocks,
    random_excitation,
    simulate,
    snr_to_noise_variance,
    split_trajectory,
)
from .simplified import (
    SimplifiedSystemMatrix,
    assemble_phi_tilde,
    check_identifiability_simplified,
    compute_condensed_predictor,
    solve_noiseless_simplified,
    solve_noisy_simplified,
)
from .vanilla import (
    VanillaSystemMatrix,
    assemble_psi_tilde,
    check_identifiability_vanilla,
    solve_noiseless_vanilla,
    solve_noisy_vanilla,
)

log = logging.getLogger(__name__)

CSV_HEADER = ["sweep_param", "value", "trial", "seed", "solver", "err", "residual", "wall_time_s", "identifiable"]
BENCH_EXTRA = ["psi_cols", "phi_cols", "env"]


def estimation_error(Q_hat, R_hat, Q, R) -> float:
    """Scale-invariant relative Frobenius error of ``diag(Q_hat, R_hat)``.

    ``inf_{tau>0} ||tau X_hat - X||_F / ||X||_F`` with the optimal
    ``tau = <X_hat, X> / ||X_hat||^2``; when that is not positive the
    infimum is the ``tau -> 0`` limit, i.e. 1.
    """
    Xh = block_diag(np.atleast_2d(Q_hat), np.atleast_2d(R_hat))
    X = block_diag(np.atleast_2d(Q), np.atleast_2d(R))
    if Xh.shape != X.shape:
        raise ValueError("estimate and truth dimensions differ")
    nh = float(np.sum(Xh * Xh))
    if nh == 0:
        raise ValueError("estimate is identically zero")
    tau = float(np.sum(Xh * X)) / nh
    if tau <= 0:
        return 1.0
    return float(np.linalg.norm(tau * Xh - X) / np.linalg.norm(X))


def trial_seed(master: int, *keys: int) -> int:
    return int(np.random.SeedSequence([master, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class TrialData:
    blocks: HankelBlocks
    w_d: Trajectory
    w_o: Trajectory
    w_ini: Trajectory
    w_tail: Trajectory

    @property
    def z_ini(self) -> np.ndarray:
        return np.concatenate([self.w_ini.stacked_inputs(), self.w_ini.stacked_outputs()])


@functools.lru_cache(maxsize=None)
def _warn_lag(T_ini: int, lag: int) -> None:
    log.warning("T_ini=%d is below the lag bound %d; the initial state may not be unique", T_ini, lag)


def make_trial(
    cfg: RunConfig, T_ini: int, excitation_seed: int, snr_db: float = math.inf, noise_seed: int = 0
) -> TrialData:
    """Offline data ``w_d`` from random excitation and the online optimal ``w_o``.

    Noise is applied according to ``cfg.noise_target`` / ``cfg.noise_channels``.
    """
    if T_ini < cfg.system.lag_bound:
        _warn_lag(T_ini, cfg.system.lag_bound)
    u = random_excitation(cfg.system.m, cfg.T, cfg.excitation_amplitude, excitation_seed)
    w_d = simulate(cfg.system, cfg.x0, u)
    w_o = lq_oracle(cfg.system, cfg.weights, cfg.x0, T_ini + cfg.N)
    if math.isfinite(snr_db):
        if cfg.noise_target in ("online", "both"):
            w_o = add_observation_noise(w_o, snr_db, noise_seed, cfg.noise_channels)
        if cfg.noise_target in ("offline", "both"):
            w_d = add_observation_noise(w_d, snr_db, noise_seed + 1, cfg.noise_channels)
    w_ini, w_tail = split_trajectory(w_o, T_ini)
    blocks = build_hankel_blocks(w_d, T_ini, cfg.N, cfg.system.n)
    return TrialData(blocks, w_d, w_o, w_ini, w_tail)


def vanilla_matrix(td: TrialData) -> VanillaSystemMatrix:
    return assemble_psi_tilde(td.blocks, td.w_tail.stacked_inputs(), td.w_tail.stacked_outputs())


def simplified_matrix(td: TrialData) -> SimplifiedSystemMatrix:
    cp = compute_condensed_predictor(td.blocks)
    return assemble_phi_tilde(cp, td.z_ini, td.w_tail.stacked_inputs())


def run_solver(td: TrialData, solver: str, noisy: bool) -> tuple[WeightEstimate | None, bool]:
    """Returns ``(estimate or None, identifiable)``."""
    if solver == "vanilla":
        sm = vanilla_matrix(td)
        ok, _ = check_identifiability_vanilla(sm)
        solve = solve_noisy_vanilla if noisy else solve_noiseless_vanilla
    else:
        sm = simplified_matrix(td)
        ok, _ = check_identifiability_simplified(sm)
        solve = solve_noisy_simplified if noisy else solve_noiseless_simplified
    if not noisy and not ok:
        return None, False
    try:
        return solve(sm), ok
    except (UnidentifiableError, InconsistentDataError):
        return None, False


@dataclass(frozen=True)
class ExperimentRecord:
    sweep_param_name: str
    sweep_param_value: float
    trial: int
    seed: int
    solver_tag: str
    err: float | None
    residual: float | None
    wall_time_s: float | None
    identifiable: bool

    def __post_init__(self):
        for name in ("err", "residual", "wall_time_s"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")

    def sort_key(self):
        return (self.sweep_param_value, self.trial, self.solver_tag)


def _trial_records(cfg: RunConfig, name: str, value: float, trial: int, td: TrialData, seed: int,
                   solvers, noisy: bool) -> list[ExperimentRecord]:
    out = []
    for solver in solvers:
        t0 = time.perf_counter()
        est, ok = run_solver(td, solver, noisy)
        dt = time.perf_counter() - t0
        err = None if est is None else estimation_error(est.Q_hat, est.R_hat, cfg.weights.Q, cfg.weights.R)
        tag = f"{'noisy' if noisy else 'noiseless'}-{solver}"
        out.append(ExperimentRecord(
            name, float(value), trial, seed, tag, err,
            None if est is None else est.residual,
            dt if cfg.record_timing else None, ok,
        ))
    return out


def _tini_task(args) -> list[ExperimentRecord]:
    cfg, idx, T_ini, trial = args
    seed = trial_seed(cfg.master_seed, 0, idx, trial)
    noisy = math.isfinite(cfg.snr_db)
    td = make_trial(cfg, T_ini, seed, cfg.snr_db, trial_seed(cfg.master_seed, 0, idx, trial, 1))
    return _trial_records(cfg, "T_ini", T_ini, trial, td, seed, cfg.sweep_solvers, noisy)


def _noise_task(args) -> list[ExperimentRecord]:
    cfg, snr, trial = args
    # common random numbers across SNR levels: same data and noise shape
    seed = trial_seed(cfg.master_seed, 1, trial)
    td = make_trial(cfg, cfg.T_ini, seed, snr, trial_seed(cfg.master_seed, 1, trial, 1))
    noisy = math.isfinite(snr)
    return _trial_records(cfg, "snr_db", snr, trial, td, seed, cfg.sweep_solvers, noisy)


def _run(tasks, fn, jobs: int) -> list[ExperimentRecord]:
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(fn, tasks))
    else:
        chunks = [fn(t) for t in tasks]
    recs = [r for c in chunks for r in c]
    return sorted(recs, key=ExperimentRecord.sort_key)


def run_tini_sweep(cfg: RunConfig, jobs: int = 1) -> list[ExperimentRecord]:
    """Both solvers for every ``T_ini`` in the grid and every trial.

    Noiseless solvers (with identifiability gating) when ``cfg.snr_db`` is
    infinite, the unit-norm noisy solvers otherwise.
    """
    tasks = [(cfg, i, t, k) for i, t in enumerate(cfg.tini_grid) for k in range(cfg.trials)]
    return _run(tasks, _tini_task, jobs)


def run_noise_sweep(cfg: RunConfig, jobs: int = 1) -> list[ExperimentRecord]:
    tasks = [(cfg, float(s), k) for s in cfg.snr_grid for k in range(cfg.trials)]
    return _run(tasks, _noise_task, jobs)


@dataclass(frozen=True)
class BenchRecord:
    record: ExperimentRecord
    psi_cols: int
    phi_cols: int
    env: str


def environment_note() -> str:
    return f"{platform.python_implementation()} {platform.python_version()} numpy {np.__version__} {platform.machine()}"


def _median_time(fn, repeats: int) -> float:
    fn()  # warmup
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_timing_bench(cfg: RunConfig) -> list[BenchRecord]:
    """Median solve time of the two noisy solvers across ``cfg.bench_tini``.

    Only the solve call is timed; assembly is excluded.
    """
    env = environment_note()
    out = []
    for idx, T_ini in enumerate(cfg.bench_tini):
        seed = trial_seed(cfg.master_seed, 2, idx)
        td = make_trial(cfg, T_ini, seed, cfg.snr_db, trial_seed(cfg.master_seed, 2, idx, 1))
        psi = vanilla_matrix(td)
        phi = simplified_matrix(td)
        for solver, sm, fn in (("vanilla", psi, solve_noisy_vanilla), ("simplified", phi, solve_noisy_simplified)):
            est = fn(sm)
            t = _median_time(lambda: fn(sm), cfg.bench_repeats)
            err = estimation_error(est.Q_hat, est.R_hat, cfg.weights.Q, cfg.weights.R)
            rec = ExperimentRecord("T_ini", float(T_ini), 0, seed, f"noisy-{solver}", err, est.residual, t, True)
            out.append(BenchRecord(rec, psi.psi_tilde.shape[1], phi.phi_tilde.shape[1], env))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _row(r: ExperimentRecord) -> list[str]:
    return [r.sweep_param_name, _fmt(r.sweep_param_value), _fmt(r.trial), _fmt(r.seed), r.solver_tag,
            _fmt(r.err), _fmt(r.residual), _fmt(r.wall_time_s), _fmt(r.identifiable)]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    bench = bool(records) and isinstance(records[0], BenchRecord)
    wr.writerow(CSV_HEADER + (BENCH_EXTRA if bench else []))
    for r in records:
        if bench:
            wr.writerow(_row(r.record) + [str(r.psi_cols), str(r.phi_cols), r.env])
        else:
            wr.writerow(_row(r))
    return buf.getvalue()


def write_records(records, out_dir, sweep: str, label: str, meta: dict | None = None) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{sweep}_{label}.csv"
    path.write_text(records_to_csv(records))
    if meta is not None:
        (out_dir / f"{sweep}_{label}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def noise_metadata(cfg: RunConfig) -> dict:
    """Describes the SNR-to-variance conversion for a noise sweep."""
    return {
        "snr_definition": "10*log10(mean(signal^2) / noise_variance), per channel over the trajectory",
        "noise_variance": "mean(signal^2) * 10**(-snr_db/10)",
        "variance_factor_per_snr_db": {str(s): snr_to_noise_variance(1.0, s) for s in cfg.snr_grid},
        "channels": cfg.noise_channels,
        "target": cfg.noise_target,
        "T_ini": cfg.T_ini,
        "N": cfg.N,
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
    }


def summarize(records: list[ExperimentRecord]) -> dict:
    """Per (solver, value): mean/median/var of err, outlier count (err > 3x median), id rate."""
    out: dict = {}
    for r in records:
        out.setdefault((r.solver_tag, r.sweep_param_value), []).append(r)
    summary = {}
    for key, rs in sorted(out.items()):
        errs = np.array([r.err for r in rs if r.err is not None])
        med = float(np.median(errs)) if errs.size else math.nan
        summary[key] = {
            "n": len(rs),
            "identified": int(sum(r.identifiable for r in rs)),
            "mean_err": float(errs.mean()) if errs.size else math.nan,
            "median_err": med,
            "var_err": float(errs.var()) if errs.size else math.nan,
            "max_err": float(errs.max()) if errs.size else math.nan,
            "outliers": int(np.sum(errs > 3 * med)) if errs.size else 0,
        }
    return summary


def record_dict(r: ExperimentRecord) -> dict:
    return asdict(r)
