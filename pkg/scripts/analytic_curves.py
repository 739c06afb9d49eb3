"""Relative-bias curves for exponential data stopped at the k-observation level.

Writes analytic.csv with the closed-form std/ex/pc curves and a Monte Carlo
column for full conditioning.
"""

import argparse
import sys

from evstop import cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k-range", default="2:2000:31")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="out/analytic")
    a = p.parse_args()
    return cli.main(["analytic", "--k-range", a.k_range, "--k", "7", "--reps", str(a.reps),
                     "--seed", str(a.seed), "--out", a.out])


if __name__ == "__main__":
    sys.exit(main())
