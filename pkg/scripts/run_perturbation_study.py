"""First-order perturbation bound vs actual deviation over random input directions.

Usage: python3 scripts/run_perturbation_study.py [--config FILE] [--out DIR] [--directions N]
"""
import argparse
from pathlib import Path

import numpy as np

from ioc_forge.config import parse_config
from ioc_forge.experiments import make_trial, trial_seed
from ioc_forge.perturbation import direction_study, rows_to_csv
from ioc_forge.simplified import compute_condensed_predictor


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out")
    ap.add_argument("--directions", type=int, default=50)
    args = ap.parse_args()
    cfg = parse_config(args.config)
    td = make_trial(cfg, cfg.T_ini, trial_seed(cfg.master_seed, 4))
    cp = compute_condensed_predictor(td.blocks)
    eps = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4]
    rows = direction_study(cp, td.z_ini, td.w_tail.stacked_inputs(), cfg.weights.Q, cfg.weights.R,
                           eps, n_directions=args.directions, seed=cfg.master_seed)
    for e in eps:
        r = np.array([row.ratio for row in rows if row.epsilon == e])
        print(f"eps={e:.0e} median ratio={np.median(r):.3f} max={r.max():.3f} within 1.5x: {np.mean(r <= 1.5):.0%}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"perturbation_{cfg.run_label()}.csv"
    path.write_text(rows_to_csv(rows))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
