"""Queries-to-target study: full pool vs. weighted coreset per seed."""

import argparse
from pathlib import Path

from metacore.experiments import LqrRunConfig, run_sample_complexity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/complexity")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--tasks", type=int, default=40)
    ap.add_argument("--coreset", type=int, default=10)
    ap.add_argument("--fracs", type=float, nargs="+", default=[0.5, 0.2, 0.1],
                    help="gap targets as fractions of the initial mean gap")
    args = ap.parse_args()

    for seed in args.seeds:
        cfg = LqrRunConfig(m=args.tasks, l_size=args.coreset,
                           modes=("coreset", "full_pool"), seed=seed)
        out = run_sample_complexity(Path(args.out) / f"seed{seed}", cfg,
                                    fracs=tuple(args.fracs))
        ratios = ", ".join(f"{k}: {v:.2f}" for k, v in out["ratios"].items())
        print(f"seed {seed}: full/coreset query ratio {{{ratios}}}")
        for eps, mode in out["censored"]:
            print(f"  censored: {mode} never reached gap {eps:.4f}")


if __name__ == "__main__":
    main()
