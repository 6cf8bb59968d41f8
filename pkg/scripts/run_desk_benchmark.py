#!/usr/bin/env python3
"""Run the desk-scale benchmark grid over the bundled instances.

Writes results.csv, comparison.txt and hypothesis.txt into --out.  Desk
budgets keep the whole grid in the tens of minutes; pass --full for the
published-scale budgets (hours).
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from vrp_rpd.alns import AlnsParams
from vrp_rpd.bench import ExperimentConfig, run_experiment
from vrp_rpd.brkga import BrkgaParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(ROOT / "results"))
    parser.add_argument("--seed", type=int, default=136)
    parser.add_argument("--replicates", type=int, default=3,
                        help="replicates for the stochastic variants")
    parser.add_argument("--full", action="store_true",
                        help="published-scale budgets instead of desk budgets")
    args = parser.parse_args()

    files = [ROOT / "data" / "gr17.tsp", ROOT / "data" / "gr24.tsp"]
    files += sorted((ROOT / "data" / "desk").glob("*.tsp"))

    if args.full:
        alns = AlnsParams()
        brkga = BrkgaParams()
    else:
        alns = AlnsParams(max_iter=8000)
        brkga = BrkgaParams(population=200, generations=60)

    config = ExperimentConfig(
        instance_files=files,
        replicates={"base": 1, "2x": 1, "5x": 1,
                    "1R10": args.replicates, "1R20": args.replicates},
        seed=args.seed,
        alns_params=alns,
        brkga_params=brkga,
        out_dir=args.out,
    )
    rows, failures = run_experiment(config)
    print(f"{len(rows)} rows written to {args.out}")
    for fail in failures:
        print("FAILED:", *fail)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
