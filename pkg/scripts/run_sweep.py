"""Run a suite of experiment configs and print the pass/fail table.

    python scripts/run_sweep.py [suite.json] [--threads 4] [--out summary.txt]
"""
import argparse
import sys
from pathlib import Path

from randiff import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("suite", nargs="?", default=str(Path(__file__).with_name("acceptance_suite.json")))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args()
    argv = ["sweep", "--config", args.suite, "--threads", str(args.threads)]
    if args.out:
        argv += ["--out", args.out]
    return cli.main(argv)


if __name__ == "__main__":
    sys.exit(main())
