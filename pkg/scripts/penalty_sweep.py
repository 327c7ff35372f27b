"""Sweep the gradient-norm penalty weight across seeds and compare runs.

Trains the chosen critic-constraint mode at each weight in --weights for
each seed in --seeds, then writes comparison.{txt,json,svg} over all runs.

    python3 scripts/make_corpus.py --out runs/corpus
    python3 scripts/penalty_sweep.py --corpus runs/corpus/corpus.txt \
        --out runs/sweep --mode wgan-lp --weights 1 10 100 --seeds 0 1 2
"""
from __future__ import annotations

import argparse
import os
import sys

from textganlab import harness
from textganlab.config import ExperimentConfig, validate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", required=True, help="corpus text file")
    parser.add_argument("--out", default="runs/sweep", help="sweep directory")
    parser.add_argument("--mode", default="wgan-lp", choices=["wgan-gp", "wgan-lp"])
    parser.add_argument("--weights", type=float, nargs="+", default=[1.0, 10.0, 100.0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--max-len", type=int, default=5)
    args = parser.parse_args()

    run_dirs = []
    for lam in args.weights:
        for seed in args.seeds:
            out = os.path.join(args.out, f"{args.mode}_lam{lam:g}_s{seed}")
            cfg = ExperimentConfig(
                corpus_path=args.corpus, mode=args.mode, lam=lam, seed=seed,
                hidden_dim=32, embed_dim=16, noise_dim=16,
                batch_size=64, n_critic=5, iterations=args.iterations, lr=1e-3,
                max_len=args.max_len, iters_per_stage=100,
                teacher_start=0.8, teacher_decay=0.7,
                out=out, eval_interval=max(1, args.iterations // 4),
                sample_interval=max(1, args.iterations // 5),
                checkpoint_interval=max(1, args.iterations // 2),
            )
            validate(cfg)
            record = harness.run(cfg)
            run_dirs.append(record.out_dir)
            print(f"{out}: diverged={record.diverged} "
                  f"wall={record.wall_s:.0f}s", flush=True)

    if len(run_dirs) < 2:
        print("single run, skipping comparison")
        return 0
    cmp_dir = os.path.join(args.out, "comparison")
    harness.compare(run_dirs, cmp_dir)
    with open(os.path.join(cmp_dir, "comparison.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return 0


if __name__ == "__main__":
    sys.exit(main())
