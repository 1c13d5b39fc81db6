"""Noisy chain on N(0, 1) with log-normal weights for N = 10, 100, 1000; writes histograms and TV."""

import argparse

from noisymh.experiments import run_experiment, resolve_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/lognormal")
    ap.add_argument("--iterations", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = resolve_config({"iterations": args.iterations, "seeds": [args.seed]}, preset="fig1")
    report = run_experiment(cfg, args.out, workers=args.workers, gnuplot=True)
    for row in report["summary"]:
        print(f"N={row['N']:5d}  acceptance {row['acceptance']:.3f}  TV {row['tv']:.4f}")


if __name__ == "__main__":
    main()
