"""Train a coreset initialization, then fine-tune it on unseen tasks
against a random stabilizing gain.  Writes the training run under
``<out>/train-seed<k>`` and the adaptation curves under ``<out>/meta-seed<k>``."""

import argparse
from pathlib import Path

from metacore.experiments import (LqrRunConfig, run_lqr_convergence,
                                  run_meta_test)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/adaptation")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--k-steps", type=int, default=30)
    ap.add_argument("--unseen", type=int, default=10)
    args = ap.parse_args()

    for seed in args.seeds:
        train_dir = Path(args.out) / f"train-seed{seed}"
        run_lqr_convergence(train_dir, LqrRunConfig(modes=("coreset",), seed=seed))
        out = run_meta_test(Path(args.out) / f"meta-seed{seed}", train_dir,
                            k_steps=args.k_steps, n_unseen=args.unseen)
        for name, summary in out["controllers"].items():
            print(f"seed {seed} {name:<10} gap {summary['initial_mean_gap']:.4f}"
                  f" -> {summary['final_mean_gap']:.6f} after {args.k_steps} steps")


if __name__ == "__main__":
    main()
