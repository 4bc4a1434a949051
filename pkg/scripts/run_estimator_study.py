"""Median two-point-estimator error over a (samples, radius) grid,
on an LQR plant and on a constant function (sanity: exact zero)."""

import argparse
from pathlib import Path

from metacore.experiments import run_estimator_diagnostic


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/estimator")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for function in ("lqr", "constant"):
        out = run_estimator_diagnostic(Path(args.out) / function,
                                       function=function,
                                       trials=args.trials, seed=args.seed)
        print(f"{function}: wrote {out['csv']}")


if __name__ == "__main__":
    main()
