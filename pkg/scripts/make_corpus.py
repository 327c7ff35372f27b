"""Synthesize a grammar corpus and report its pipeline statistics.

Writes <out>/corpus.txt plus the ingest artifacts (vocab.txt, train.txt,
heldout.txt, ingest.json) that a training config can point at.

    python3 scripts/make_corpus.py --out runs/corpus --count 10000 --seed 1234
"""
from __future__ import annotations

import argparse
import os
import sys

from textganlab import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/corpus", help="output directory")
    parser.add_argument("--count", type=int, default=10000)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--grammar", default=None, help="grammar file (default: built-in)")
    parser.add_argument("--max-vocab", type=int, default=1000)
    parser.add_argument("--parts", type=int, default=100)
    args = parser.parse_args()

    os.makedirs(args.out, exist_ok=True)
    corpus_txt = os.path.join(args.out, "corpus.txt")
    synth = ["synth", "--out", corpus_txt,
             "--count", str(args.count), "--seed", str(args.seed)]
    if args.grammar:
        synth += ["--grammar", args.grammar]
    rc = cli.main(synth)
    if rc != 0:
        return rc

    cfg_path = os.path.join(args.out, "ingest.ini")
    with open(cfg_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("[corpus]\n"
                 f"path = {corpus_txt}\n"
                 f"max_vocab = {args.max_vocab}\n"
                 f"parts = {args.parts}\n"
                 f"[run]\nout = {args.out}\n")
    return cli.main(["ingest", "--config", cfg_path])


if __name__ == "__main__":
    sys.exit(main())
