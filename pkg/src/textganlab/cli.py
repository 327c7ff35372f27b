"""Command line entry points.

Subcommands: synth (grammar corpus generation), ingest (corpus pipeline
dry run), train, eval, resume, compare.  Exit codes: 0 success, 1 usage or
configuration error, 2 training divergence (run completed and logged but
flagged), 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import checkpoint as ckpt
from . import config as cfgmod
from . import corpus as corp
from . import evaluation as ev
from . import harness

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; route them to 1 instead
    def error(self, message):
        raise cfgmod.ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="textganlab",
                     description="adversarial text generation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool):
        p.add_argument("--config", required=config_required, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override train.seed")
        p.add_argument("--out", default=None, help="override run.out directory")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       dest="overrides", help="override any config key")

    p = sub.add_parser("synth", help="sample a synthetic grammar corpus")
    p.add_argument("--out", required=True, help="output text file")
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grammar", default=None, help="grammar file (default: built-in)")
    p.add_argument("--max-depth", type=int, default=50)

    common(sub.add_parser("ingest", help="run the corpus pipeline, write splits"), True)
    common(sub.add_parser("train", help="train a model per config"), True)

    p = sub.add_parser("eval", help="score the newest checkpoint of a run")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--count", type=int, default=None, help="override eval sample count")

    p = sub.add_parser("resume", help="continue a run from its newest checkpoint")
    p.add_argument("--out", required=True, help="run directory")

    p = sub.add_parser("compare", help="cross-run comparison report")
    p.add_argument("runs", nargs="+", help="run directories (at least two)")
    p.add_argument("--out", required=True, help="directory for comparison artifacts")
    return parser


def _load_cfg(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load_config(args.config, args.overrides)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfgmod.validate(cfg)
    return cfg


def _cmd_synth(args) -> int:
    if args.grammar is not None:
        with open(args.grammar, encoding="utf-8") as fh:
            grammar = corp.parse_pcfg(fh.read())
    else:
        grammar = corp.default_grammar()
    sentences = corp.sample_pcfg(grammar, args.count, args.seed, args.max_depth)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(s + "\n")
    print(f"wrote {len(sentences)} sentences to {args.out}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    cfg = _load_cfg(args)
    full, train_c, heldout, index, sampler = harness._build_pipeline(cfg)
    os.makedirs(cfg.out, exist_ok=True)
    corp.export_vocab(full.vocab, os.path.join(cfg.out, "vocab.txt"))
    for name, part in (("train.txt", train_c), ("heldout.txt", heldout)):
        with open(os.path.join(cfg.out, name), "w", encoding="utf-8", newline="\n") as fh:
            for s in part.sentences:
                fh.write(corp.decode(full.vocab, s, cfg.level) + "\n")
    summary = {
        "sentences": len(full.sentences),
        "train": len(train_c.sentences),
        "heldout": len(heldout.sentences),
        "vocab_size": full.vocab.size,
        "level": cfg.level,
        "max_content_length": sampler.max_length,
    }
    with open(os.path.join(cfg.out, "ingest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    record = harness.run(cfg)
    print(f"run {cfg.out}: {record.iterations_done} iterations, "
          f"diverged={record.diverged}")
    return EXIT_DIVERGED if record.diverged else EXIT_OK


def _cmd_eval(args) -> int:
    report = harness.evaluate_run(args.out, count=args.count)
    sys.stdout.write(ev.format_report(report))
    return EXIT_OK


def _cmd_resume(args) -> int:
    record = harness.resume(args.out)
    print(f"run {args.out}: resumed to {record.iterations_done} iterations, "
          f"diverged={record.diverged}")
    return EXIT_DIVERGED if record.diverged else EXIT_OK


def _cmd_compare(args) -> int:
    harness.compare(args.runs, args.out)
    with open(os.path.join(args.out, "comparison.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "resume": _cmd_resume,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except (cfgmod.ConfigError, corp.CorpusError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ckpt.CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
