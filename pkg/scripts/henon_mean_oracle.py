"""Long-run estimate of the x-mean of the Henon attractor at (a, b) = (1.4, 0.3).

Runs an ensemble of orbits (default 1000 x 10^5 = 10^8 steps after a 10^3
step transient) and prints the grand mean with its standard error.  The
acceptance suite freezes this value as a regression constant.
"""

import argparse
import time

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--orbits", type=int, default=1000)
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--transient", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=12345)
    args = ap.parse_args()
    a, b = 1.4, 0.3
    rng = np.random.default_rng(args.seed)
    x, y = 0.1 * rng.random(args.orbits), 0.1 * rng.random(args.orbits)
    t0 = time.time()
    for _ in range(args.transient):
        x, y = 1.0 - a * x * x + b * y, x
    total = np.zeros(args.orbits)
    for _ in range(args.steps):
        x, y = 1.0 - a * x * x + b * y, x
        total += x
    means = total / args.steps
    print(f"steps={args.orbits * args.steps:.3g} mean={means.mean():.6f} "
          f"stderr={means.std(ddof=1) / np.sqrt(args.orbits):.2g} seconds={time.time() - t0:.1f}")


if __name__ == "__main__":
    main()
