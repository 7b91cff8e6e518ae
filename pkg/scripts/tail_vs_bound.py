"""Monte Carlo supremum tail against the union bound over a grid of eps values.

    python scripts/tail_vs_bound.py --N 10000 --family-size 100 --trials 20000
"""
import argparse
import csv
import sys

import numpy as np

from randiff.concentration import family_matrix, sup_deviations, tail_from_deviations
from randiff.profiles import Profile


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", default="constant:0.5")
    ap.add_argument("--N", type=int, default=10 ** 4)
    ap.add_argument("--family-size", type=int, default=100)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.02, 0.03, 0.05, 0.1])
    args = ap.parse_args()

    prof = Profile.parse(args.profile, args.N)
    signs = np.random.default_rng([args.seed, 1]).choice(np.array([-1, 1], dtype=np.int8),
                                                          (args.family_size, args.N))
    devs = sup_deviations(prof, family_matrix(signs, args.N), args.trials, args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["eps", "empirical_tail", "std_error", "per_event_bound", "union_bound"])
    for eps in args.eps:
        est = tail_from_deviations(devs, prof, args.N, eps, args.family_size)
        w.writerow([eps, est.empirical_tail, est.std_error, est.per_event_bound, est.bound])


if __name__ == "__main__":
    main()
