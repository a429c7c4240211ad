"""T_ini sweep on the default setup; writes a CSV and prints per-T_ini statistics.

Usage: python3 scripts/run_tini_sweep.py [--config FILE] [--out DIR] [--jobs N]
"""
import argparse

from ioc_forge.config import parse_config
from ioc_forge.experiments import run_tini_sweep, summarize, write_records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = parse_config(args.config)
    recs = run_tini_sweep(cfg, jobs=args.jobs)
    path = write_records(recs, args.out, "sweep_tini", cfg.run_label())
    for (tag, t), s in sorted(summarize(recs).items()):
        print(f"{tag:22s} T_ini={t:4g} mean_err={s['mean_err']:.3e} var={s['var_err']:.3e} "
              f"identifiable={s['identified']}/{s['n']}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
