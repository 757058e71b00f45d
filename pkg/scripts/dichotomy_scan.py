#!/usr/bin/env python3
"""Map out the triviality dichotomy for one model across a tilt grid.

Prints the analytic classification (mass, drift, gap, verdict) for each
tilt, then cross-checks a few tilts with Monte Carlo depth scans of
``log W_n`` among surviving replicates.  Usage:

    python3 scripts/dichotomy_scan.py --model models/coin_pair.json \
        --alphas 0,0.5,1,2,5 --depth-grid 5,10,20 --reps 200 --seed 2
"""

from __future__ import annotations

import argparse
from pathlib import Path

from brwlab import GrowthCaps, McConfig, classify, load_law, mc_triviality_scan

REPO = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--model", type=Path,
                        default=REPO / "models" / "coin_pair.json")
    parser.add_argument("--alphas", default="0,0.5,1,2,5")
    parser.add_argument("--depth-grid", default="5,10,20")
    parser.add_argument("--reps", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2)
    parser.add_argument("--max-nodes", type=int, default=2_000_000)
    args = parser.parse_args()

    law = load_law(args.model)
    alphas = [float(a) for a in args.alphas.split(",")]
    grid = tuple(int(n) for n in args.depth_grid.split(","))

    print(f"model: {args.model}")
    print(f"{'alpha':>8}{'m(alpha)':>12}{'drift':>10}{'gap':>12}  classification")
    for alpha in alphas:
        prof = classify(law, alpha)
        print(f"{alpha:>8.3f}{prof.m:>12.5f}{prof.drift:>10.5f}"
              f"{prof.gap:>12.6f}  {prof.classification.name}")

    print(f"\nMonte Carlo scans (reps={args.reps}, grid={list(grid)}, "
          f"seed={args.seed}):")
    cfg = McConfig(replicates=args.reps, depth=max(grid),
                   master_seed=args.seed,
                   caps=GrowthCaps(max_nodes=args.max_nodes))
    for alpha in alphas:
        report = mc_triviality_scan(law, alpha, grid, cfg)
        medians = ", ".join(f"{m:+.3f}" for m in report.medians)
        print(f"  alpha={alpha:<6.3f} verdict={report.verdict:<12} "
              f"medians of log W_n: [{medians}] "
              f"agrees_with_classification={report.agrees}")


if __name__ == "__main__":
    main()
