"""PMMH on the linear-Gaussian model: acceptance and lag-50 autocorrelation per kernel and seed."""

import argparse
import csv
from pathlib import Path

from noisymh.experiments import run_experiment, resolve_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/pmmh")
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--N", type=int, nargs="+", default=[100])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    cfg = resolve_config({"iterations": args.iterations, "seeds": args.seeds, "N": args.N}, preset="pmmh")
    report = run_experiment(cfg, args.out, workers=args.workers, gnuplot=True)
    for row in report["summary"]:
        tag = f"{row['kernel']}_N{row['N']}_seed{row['seed']}"
        with open(Path(args.out) / f"acf_{tag}.csv") as fh:
            lag50 = next(float(r["acf"]) for r in csv.DictReader(fh) if r["lag"] == "50")
        print(f"{tag:28s} acceptance {row['acceptance']:.3f}  acf(50) {lag50:.3f}")


if __name__ == "__main__":
    main()
