"""Spread of counting(N) / S(N) across seeds, next to the binomial prediction.

    python scripts/slln_histogram.py --profile power:0.5 --N 1000000 --seeds 1000
"""
import argparse
import math

import numpy as np

from randiff.profiles import Profile, partial_sums, sample, slln_ratio


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="power:0.5")
    ap.add_argument("--N", type=int, default=10 ** 6)
    ap.add_argument("--seeds", type=int, default=1000)
    ap.add_argument("--window", type=float, default=0.05)
    args = ap.parse_args()

    prof = Profile.parse(args.profile, args.N)
    u = prof.u[1:]
    S = partial_sums(prof)(args.N)
    sd = math.sqrt(float(np.sum(u * (1 - u)))) / S
    ratios = np.array([slln_ratio(sample(prof, s), args.N) for s in range(args.seeds)])
    outside = float(np.mean(np.abs(ratios - 1) > args.window))
    predicted = math.erfc(args.window / sd / math.sqrt(2))

    print(f"S(N) = {S:.2f}, predicted sd = {sd:.5f}, measured sd = {ratios.std(ddof=1):.5f}")
    print(f"share outside +-{args.window}: measured {outside:.4f}, normal approximation {predicted:.4f}")
    counts, edges = np.histogram(ratios, bins=15)
    for c, lo, hi in zip(counts, edges, edges[1:]):
        print(f"[{lo:.4f}, {hi:.4f})  {'#' * int(60 * c / counts.max())} {c}")


if __name__ == "__main__":
    main()
