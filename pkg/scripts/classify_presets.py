"""Exact birth-death verdicts for every integer-walk preset and N = 1, 2, 5."""

import argparse
import json

from noisymh.discrete_walk import classify
from noisymh.presets import DISCRETE_PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=30_000)
    ap.add_argument("--json", help="also write all evidence to this file")
    args = ap.parse_args()
    evidence = {}
    for name, preset in DISCRETE_PRESETS.items():
        for N in (1, 2, 5):
            cls = classify(preset.birth_death(N), M=args.M)
            evidence[f"{name}/N={N}"] = cls.to_json()
            p, q = cls.evidence["lim_p"], cls.evidence["lim_q"]
            print(f"{name:18s} N={N}  {cls.verdict:22s} lim p {max(p):.4f}  lim q {min(q):.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(evidence, fh, indent=2)


if __name__ == "__main__":
    main()
