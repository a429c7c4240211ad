"""SNR sweep with the noisy solvers; writes a CSV and prints per-SNR statistics.

Usage: python3 scripts/run_noise_sweep.py [--config FILE] [--out DIR] [--jobs N]
"""
import argparse

from ioc_forge.config import parse_config
from ioc_forge.experiments import noise_metadata, run_noise_sweep, summarize, write_records


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = parse_config(args.config)
    recs = run_noise_sweep(cfg, jobs=args.jobs)
    path = write_records(recs, args.out, "sweep_noise", cfg.run_label(), noise_metadata(cfg))
    for (tag, snr), s in sorted(summarize(recs).items()):
        print(f"{tag:18s} snr={snr:5g} dB mean_err={s['mean_err']:.3e} median={s['median_err']:.3e} "
              f"outliers={s['outliers']}/{s['n']}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
