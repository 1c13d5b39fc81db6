"""Marginal, pseudo-marginal and noisy chains on the three integer-walk panels, plus exact verdicts."""

import argparse
from pathlib import Path

from noisymh.experiments import run_experiment, resolve_config

PANELS = ("fig7-left", "fig7-center", "fig7-right")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/birth_death")
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    for panel in PANELS:
        cfg = resolve_config({"iterations": args.iterations, "seeds": [args.seed]}, preset=panel)
        report = run_experiment(cfg, Path(args.out) / panel, gnuplot=True)
        verdict = report["classification"]["1"]["verdict"]
        acc = ", ".join(f"{r['kernel']} {r['acceptance']:.3f}" for r in report["summary"])
        print(f"{panel:12s} noisy verdict {verdict:22s} acceptance: {acc}")


if __name__ == "__main__":
    main()
