#!/usr/bin/env python3
"""Chaos-represented linear filter against the closed-form Kalman recursion.

Ten assimilation steps of a two-state linear-Gaussian system. The degree-one
chaos representation with exact quadrature reproduces the classical Kalman
means and covariances to machine precision; this script prints both tables
side by side.
"""

import argparse

import numpy as np

from cebayes.filters import UpdateScheme, assimilate_sequence
from cebayes.models import LinearGaussianModel, exact_kalman_step, make_twin_experiment
from cebayes.rv import GermSpec, PCERV, covariance, mean


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--steps", type=int, default=10)
    args = parser.parse_args()

    model = LinearGaussianModel(
        A=[[0.95, 0.1], [0.0, 0.9]], H=[[1.0, 0.0]], Q=0.02 * np.eye(2), R=[[0.04]]
    )
    times = [float(k) for k in range(1, args.steps + 1)]
    twin = make_twin_experiment(model, [0.3, -0.2], args.seed, times)

    prior = PCERV.affine(GermSpec.gaussian(2), np.zeros(2), np.eye(2))
    steps = assimilate_sequence(
        model, twin.observations, prior, UpdateScheme("gmkf"),
        master_seed=args.seed, grid_level=2,
    )

    m, p = np.zeros(2), np.eye(2)
    print(f"{'t':>4} {'chaos mean':>24} {'kalman mean':>24} {'worst rel err':>14}")
    worst = 0.0
    for step, (_, y_hat) in zip(steps, twin.observations):
        m, p = exact_kalman_step(model, m, p, y_hat)
        mc = mean(step.analysis)
        pc = covariance(step.analysis)
        err = max(
            float(np.max(np.abs(mc - m) / np.maximum(np.abs(m), 1e-12))),
            float(np.max(np.abs(pc - p) / np.maximum(np.abs(p), 1e-12))),
        )
        worst = max(worst, err)
        print(
            f"{step.time:>4.0f} [{mc[0]:>10.6f} {mc[1]:>10.6f}] "
            f"[{m[0]:>10.6f} {m[1]:>10.6f}] {err:>14.3e}"
        )
    print(f"worst relative error over {args.steps} steps: {worst:.3e}")


if __name__ == "__main__":
    main()
