#!/usr/bin/env python3
"""Monte Carlo calibration of the decay fit: bias, worst error and bootstrap CI coverage of p."""

import argparse

import numpy as np

from qubench.fitting import fit_decay_arrays


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.95)
    ap.add_argument("--sigma", type=float, default=0.005)
    ap.add_argument("--k", type=int, default=20, help="samples per depth")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--width", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--depths", type=int, nargs="+", default=[2, 4, 8, 16, 32])
    args = ap.parse_args()

    floor = 2.0**-args.width
    rng = np.random.default_rng(args.seed)
    m = np.repeat(args.depths, args.k)
    est, covered, pinned = [], 0, 0
    for i in range(args.trials):
        y = floor + (1 - floor) * args.p**m + rng.normal(0, args.sigma, m.size)
        fit = fit_decay_arrays(m, y, floor, width=args.width, seed=i)
        est.append(fit.p)
        covered += fit.p_ci_low <= args.p <= fit.p_ci_high
        pinned += fit.floor_pinned
    est = np.array(est)
    print(f"bias {est.mean() - args.p:+.5f}  max |error| {np.abs(est - args.p).max():.5f}  "
          f"coverage {covered}/{args.trials}  floor pinned {pinned}/{args.trials}")


if __name__ == "__main__":
    main()
