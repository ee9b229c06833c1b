#!/usr/bin/env python3
"""Linear vs quadratic Bayesian update on the cubic-observation toy.

A scalar value is observed through its cube plus Gaussian error. Both
filters assimilate the same measurement; the bundles carry posterior pdf
grids on a shared abscissa, so their difference is directly comparable:

    python scripts/cubic_toy_lbu_qbu.py --out runs/toy
    node frontend/dist/plot.js pdf-overlay runs/toy/lbu runs/toy/qbu --out overlay.svg
"""

import argparse
import json
from pathlib import Path

from cebayes.config import parse_config
from cebayes.harness import compare_runs, run_experiment


def config_text(degree: int, seed: int) -> str:
    return json.dumps(
        {
            "model": {"id": "cubic-toy", "params": {"sigma_v": 0.5}},
            "truth": {"init": [1.2]},
            "prior": {
                "mean": [0.8],
                "cov": [[1.0]],
                "representation": {"kind": "ensemble", "n": 20000},
            },
            "filter": {"kind": "polynomial", "degree": degree},
            "observations": {"times": [1.0]},
            "seed": seed,
            "output": {
                "pdf": {
                    "steps": [0],
                    "components": [0],
                    "grid": {"min": -2.5, "max": 3.5, "points": 241},
                }
            },
        },
        indent=1,
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/cubic-toy")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)
    bundles = {}
    for label, degree in (("lbu", 1), ("qbu", 2)):
        bundles[label] = run_experiment(
            parse_config(config_text(degree, args.seed)), out_dir=out / label
        )
        residual = bundles[label].reports[0]["notes"]["mmse_residual"]
        print(f"{label}: map residual {residual:.6f}")
    table = compare_runs([out / "lbu", out / "qbu"])
    for row in table["pdf_l1"]:
        print(f"posterior pdf L1 distance ({row['pdf']}): {row['l1_distance']:.5f}")


if __name__ == "__main__":
    main()
