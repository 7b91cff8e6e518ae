"""Coin-flipping preset: u_n = 1/2, so R keeps each n with probability 1/2.

Prints the random and centered ergodic averages along N for a few systems.
Nothing is asserted; the output is for inspection.

    python scripts/coin_flipping.py --N 100000 --seed 0
"""
import argparse

import numpy as np

from randiff.dynamics import (
    FiniteSystem, Observable, centered_average, invariant_projection, random_average,
)
from randiff.profiles import Profile, sample


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=10 ** 5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--ell", type=int, default=2)
    ap.add_argument("--systems", nargs="+", default=["rotation:101", "doubling:101", "skew:32"])
    args = ap.parse_args()

    prof = Profile.constant(0.5, args.N)
    R = sample(prof, args.seed)
    checkpoints = np.unique(np.geomspace(100, args.N, 8).astype(int))
    for spec in args.systems:
        sys = FiniteSystem.parse(spec)
        Fs = [Observable.random_indicator(sys.m, [args.seed, i]) for i in range(args.ell)]
        x = 1
        proj = np.prod([invariant_projection(sys, F).values[x] for F in Fs])
        print(f"{spec}: product of projections at x={x}: {proj:.4f}")
        print(f"{'N':>8}  {'random':>9}  {'centered':>9}")
        for N in checkpoints:
            r = random_average(sys, Fs, R, int(N), x)
            c = centered_average(sys, Fs, prof, R, int(N), x)
            print(f"{N:>8}  {r:>9.5f}  {c:>9.5f}")


if __name__ == "__main__":
    main()
