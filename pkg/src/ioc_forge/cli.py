"""``ioc-forge`` command-line entry point.

Exit codes: 0 success, 2 unidentifiable (check-id / noiseless invert),
1 error, 64 unknown subcommand.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import SOLVERS, ConfigError, RunConfig, parse_config
from .estimate import InconsistentDataError, UnidentifiableError, write_estimate
from .experiments import (
    TrialData,
    estimation_error,
    make_trial,
    noise_metadata,
    records_to_csv,
    run_noise_sweep,
    run_timing_bench,
    run_tini_sweep,
    simplified_matrix,
    summarize,
    trial_seed,
    vanilla_matrix,
    write_records,
)
from .forward import data_enabled_lq, lq_cost
from .lti import Trajectory, build_hankel_blocks, read_trajectory_csv, split_trajectory, write_trajectory_csv
from .simplified import (
    check_horizon,
    check_identifiability_simplified,
    horizon_threshold,
    solve_noiseless_simplified,
    solve_noisy_simplified,
)
from .vanilla import check_identifiability_vanilla, solve_noiseless_vanilla, solve_noisy_vanilla

EXIT_OK, EXIT_ERROR, EXIT_UNIDENTIFIABLE, EXIT_USAGE = 0, 1, 2, 64
SUBCOMMANDS = ("simulate", "forward", "invert", "check-id", "sweep-tini", "sweep-noise", "bench")
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("ioc_forge")


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("IOC_FORGE_LOG", "quiet").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides seeds.master)")
    p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("--trials", type=int, help="trials per sweep point (overrides seeds.trials)")
    p.add_argument("--T-ini", dest="T_ini", type=int, help="initial window length")
    p.add_argument("--N", dest="N", type=int, help="control horizon")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="observation SNR in dB (inf = noiseless)")
    p.add_argument("--label", help="run label used in artifact names")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ioc-forge", description="Data-driven inverse LQ optimal control.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")

    p = sub.add_parser("simulate", help="generate offline data w_d and an online optimal trajectory w_o")
    _common(p)

    p = sub.add_parser("forward", help="solve the data-enabled LQ problem and compare with the model oracle")
    _common(p)

    p = sub.add_parser("invert", help="estimate (Q, R) from data")
    _common(p)
    p.add_argument("--solver", choices=SOLVERS, help="inverse solver (overrides solver)")
    p.add_argument("--noisy", action="store_true", help="use the unit-norm least-squares solver")
    p.add_argument("--wd", type=Path, help="offline trajectory CSV (generated if omitted)")
    p.add_argument("--wo", type=Path, help="online optimal trajectory CSV (generated if omitted)")

    p = sub.add_parser("check-id", help="identifiability check")
    _common(p)
    p.add_argument("--mode", choices=("vanilla", "simplified", "horizon"), default="simplified")
    p.add_argument("--wd", type=Path)
    p.add_argument("--wo", type=Path)

    for name, helptext in (("sweep-tini", "error vs initial window length"),
                           ("sweep-noise", "error vs SNR"),
                           ("bench", "solve-time benchmark")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
    return parser


def _config(args) -> RunConfig:
    overrides = {
        "seeds.master": args.seed,
        "seeds.trials": args.trials,
        "output_dir": None if args.out is None else str(args.out),
        "T_ini": args.T_ini,
        "N": args.N,
        "noise.snr_db": args.snr_db,
        "label": args.label,
        "solver": getattr(args, "solver", None),
    }
    return parse_config(args.config, overrides)


def _trial(cfg: RunConfig, args) -> TrialData:
    """Trial from files when ``--wd/--wo`` are given, otherwise generated."""
    wd_path, wo_path = getattr(args, "wd", None), getattr(args, "wo", None)
    if wd_path is None and wo_path is None:
        seed = trial_seed(cfg.master_seed, 3)
        return make_trial(cfg, cfg.T_ini, seed, cfg.snr_db, trial_seed(cfg.master_seed, 3, 1))
    if wd_path is None or wo_path is None:
        raise ConfigError("--wd and --wo must be given together")
    w_d, w_o = read_trajectory_csv(wd_path), read_trajectory_csv(wo_path)
    if len(w_o) != cfg.T_ini + cfg.N:
        raise ConfigError(f"--wo has {len(w_o)} samples, expected T_ini + N = {cfg.T_ini + cfg.N}")
    w_ini, w_tail = split_trajectory(w_o, cfg.T_ini)
    return TrialData(build_hankel_blocks(w_d, cfg.T_ini, cfg.N), w_d, w_o, w_ini, w_tail)


def cmd_simulate(cfg: RunConfig, args) -> int:
    td = _trial(cfg, args)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(td.w_d, out / "w_d.csv")
    write_trajectory_csv(td.w_o, out / "w_o.csv")
    print(f"wrote {out / 'w_d.csv'} ({len(td.w_d)} samples) and {out / 'w_o.csv'} ({len(td.w_o)} samples)")
    return EXIT_OK


def cmd_forward(cfg: RunConfig, args) -> int:
    td = _trial(cfg, args)
    sol = data_enabled_lq(td.blocks, td.w_ini, cfg.weights)
    oracle_cost = lq_cost(td.w_tail.stacked_inputs(), td.w_tail.stacked_outputs(), cfg.weights)
    gap = float(np.max(np.abs(sol.u - td.w_tail.stacked_inputs())))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / "forward.csv"
    write_trajectory_csv(Trajectory(sol.u.reshape(cfg.N, -1), sol.y.reshape(cfg.N, -1)), path)
    print(f"data-enabled cost {sol.cost:.12g}  oracle tail cost {oracle_cost:.12g}  max|du| {gap:.3e}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_invert(cfg: RunConfig, args) -> int:
    td = _trial(cfg, args)
    noisy = args.noisy or math.isfinite(cfg.snr_db)
    if cfg.solver == "vanilla":
        sm = vanilla_matrix(td)
        est = solve_noisy_vanilla(sm) if noisy else solve_noiseless_vanilla(sm)
    else:
        sm = simplified_matrix(td)
        est = solve_noisy_simplified(sm) if noisy else solve_noiseless_simplified(sm)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / f"estimate_{est.solver_tag}.json"
    write_estimate(est, path)
    err = estimation_error(est.Q_hat, est.R_hat, cfg.weights.Q, cfg.weights.R)
    np.set_printoptions(precision=6, suppress=True)
    print(f"solver {est.solver_tag}  residual {est.residual:.3e}  err {err:.3e}")
    print(f"Q_hat =\n{est.Q_hat}\nR_hat =\n{est.R_hat}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_check_id(cfg: RunConfig, args) -> int:
    m, p = cfg.system.m, cfg.system.p
    if args.mode == "horizon":
        ok = check_horizon(m, p, cfg.N)
        thr = horizon_threshold(m, p)
        if ok:
            print(f"horizon N={cfg.N} passes (unidentifiable for N < {thr:g} with m={m}, p={p})")
            return EXIT_OK
        print(f"unidentifiable: horizon N={cfg.N} < {thr:g} for m={m}, p={p}; "
              "the simplified system has fewer equations than weight unknowns minus one")
        return EXIT_UNIDENTIFIABLE
    if not check_horizon(m, p, cfg.N) and args.mode == "simplified":
        print(f"unidentifiable: horizon N={cfg.N} < {horizon_threshold(m, p):g} for m={m}, p={p}")
        return EXIT_UNIDENTIFIABLE
    td = _trial(cfg, args)
    if args.mode == "vanilla":
        sm = vanilla_matrix(td)
        ok, rep = check_identifiability_vanilla(sm)
        _, lit = check_identifiability_vanilla(sm, literal=True)
        reduced, _ = sm.costate_reduction()
        print(f"rank(psi_tilde) = {lit.numerical_rank} of {sm.n_unknowns} columns; "
              f"costate-reduced rank {rep.numerical_rank} of {reduced.shape[1]}")
    else:
        sm = simplified_matrix(td)
        ok, rep = check_identifiability_simplified(sm)
        print(f"rank(phi_tilde) = {rep.numerical_rank} of {sm.n_weights} columns")
    print("identifiable" if ok else "unidentifiable")
    return EXIT_OK if ok else EXIT_UNIDENTIFIABLE


def _print_summary(records) -> None:
    for (tag, value), s in summarize(records).items():
        print(f"{tag:22s} {value:8g}  n={s['n']:3d} id={s['identified']:3d}  "
              f"mean={s['mean_err']:.3e} median={s['median_err']:.3e} max={s['max_err']:.3e} "
              f"outliers={s['outliers']}")


def cmd_sweep(cfg: RunConfig, args, which: str) -> int:
    meta = {"master_seed": cfg.master_seed, "trials": cfg.trials, "N": cfg.N, "T": cfg.T}
    if which == "tini":
        records = run_tini_sweep(cfg, args.jobs)
        meta["tini_grid"] = list(cfg.tini_grid)
        meta["snr_db"] = "inf" if math.isinf(cfg.snr_db) else cfg.snr_db
    else:
        records = run_noise_sweep(cfg, args.jobs)
        meta.update(noise_metadata(cfg))
    path = write_records(records, cfg.output_dir, f"sweep_{which}", cfg.run_label(), meta)
    _print_summary(records)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig, args) -> int:
    recs = run_timing_bench(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / f"bench_{cfg.run_label()}.csv"
    path.write_text(records_to_csv(recs))
    print("absolute times are machine-dependent; compare orderings only")
    for b in recs:
        r = b.record
        print(f"T_ini={r.sweep_param_value:4g} {r.solver_tag:16s} median {r.wall_time_s:.3e} s  "
              f"psi_cols={b.psi_cols} phi_cols={b.phi_cols}")
    print(f"wrote {path}")
    return EXIT_OK


def dispatch(command: str, cfg: RunConfig, args) -> int:
    if command == "simulate":
        return cmd_simulate(cfg, args)
    if command == "forward":
        return cmd_forward(cfg, args)
    if command == "invert":
        return cmd_invert(cfg, args)
    if command == "check-id":
        return cmd_check_id(cfg, args)
    if command == "sweep-tini":
        return cmd_sweep(cfg, args, "tini")
    if command == "sweep-noise":
        return cmd_sweep(cfg, args, "noise")
    if command == "bench":
        return cmd_bench(cfg, args)
    raise ValueError(f"unknown subcommand {command!r}")


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    _setup_logging()
    parser = build_parser()
    if not argv or (not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS):
        parser.print_usage(sys.stderr)
        if argv:
            print(f"ioc-forge: unknown subcommand {argv[0]!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_ERROR
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _config(args)
        return dispatch(args.command, cfg, args)
    except UnidentifiableError as exc:
        print(f"unidentifiable: {exc}")
        return EXIT_UNIDENTIFIABLE
    except (ConfigError, InconsistentDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
