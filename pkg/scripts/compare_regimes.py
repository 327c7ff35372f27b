"""Train the four critic-constraint regimes on one corpus and compare.

Covers the standard sigmoid-discriminator game, weight clipping, the
two-sided gradient penalty, and the one-sided variant, all from the same
seed and curriculum, then writes comparison.{txt,json,svg}.

    python3 scripts/make_corpus.py --out runs/corpus
    python3 scripts/compare_regimes.py --corpus runs/corpus/corpus.txt --out runs/regimes
"""
from __future__ import annotations

import argparse
import os
import sys

from textganlab import harness
from textganlab.config import MODES, ExperimentConfig, validate


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", required=True, help="corpus text file")
    parser.add_argument("--out", default="runs/regimes", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--iterations", type=int, default=2000)
    parser.add_argument("--lam", type=float, default=10.0, help="penalty weight")
    parser.add_argument("--clip", type=float, default=0.01, help="weight clip bound")
    parser.add_argument("--max-len", type=int, default=5)
    args = parser.parse_args()

    run_dirs = []
    for mode in MODES:
        out = os.path.join(args.out, mode)
        cfg = ExperimentConfig(
            corpus_path=args.corpus, mode=mode, lam=args.lam, clip=args.clip,
            seed=args.seed, hidden_dim=32, embed_dim=16, noise_dim=16,
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
        print(f"{mode}: diverged={record.diverged} wall={record.wall_s:.0f}s",
              flush=True)

    cmp_dir = os.path.join(args.out, "comparison")
    harness.compare(run_dirs, cmp_dir)
    with open(os.path.join(cmp_dir, "comparison.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return 0


if __name__ == "__main__":
    sys.exit(main())
