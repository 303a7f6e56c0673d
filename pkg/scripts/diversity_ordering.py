"""Diversity slopes of the four-group code and the clustered Alamouti baseline."""

import argparse
from pathlib import Path

from ofdm_dstc.sim import ExperimentConfig, estimate_diversity, run_sweep


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="results/diversity")
    p.add_argument("--snr-db", type=float, nargs="+", default=[28.0, 29.5, 31.0, 32.5, 34.0])
    p.add_argument("--target-errors", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    out = Path(args.out)
    slopes = {}
    for scheme in ("coherent", "clustered_baseline"):
        cfg = ExperimentConfig(scheme=scheme, snr_db=tuple(args.snr_db), max_trials=4 * 10 ** 6,
                               target_errors=args.target_errors, chunk=256,
                               master_seed=args.seed, workers=args.workers,
                               output=str(out / f"{scheme}.csv"))
        res = run_sweep(cfg, progress=lambda pt, s=scheme: print(
            f"{s:18s} {pt.snr_db:5.1f} dB  ber={pt.ber:.3e}  errors={pt.bit_errors}", flush=True))
        slopes[scheme] = estimate_diversity(res, min_errors=args.target_errors)
    for k, v in slopes.items():
        print(f"{k}: slope {v:.2f}")
    print(f"difference: {slopes['coherent'] - slopes['clustered_baseline']:.2f}")


if __name__ == "__main__":
    main()
