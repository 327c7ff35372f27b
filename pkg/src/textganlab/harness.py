"""Experiment orchestration: run, resume, evaluate, compare.

A run owns one output directory:

    config.ini    canonical snapshot of the effective configuration
    vocab.txt     one token per line, line number = id
    metrics.csv   one row per iteration (fixed schema, see METRICS_HEADER)
    samples/      periodic generator output, one sentence per line
    eval/         periodic metric reports (key=value) plus their samples
    checkpoints/  manifest+blob pairs for exact resume
    plots/        deterministic SVG training curves
    run.json      summary: divergence flag, wall clock, aggregate novelty

Determinism contract: every random draw comes either from the training
rng (seeded [seed, 2], saved in checkpoints) or from per-event rngs seeded
[seed, 3, iteration] (evals) and [seed, 4, iteration] (sample dumps), so a
rerun or a checkpoint resume reproduces metrics.csv and sample files byte
for byte.  Wall-clock times go to run.json; the wall_s metrics column is
0.0 unless run.wall_clock is enabled, keeping the csv reproducible.
"""
from __future__ import annotations

import csv
import glob
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt
from . import config as cfgmod
from . import corpus as corp
from . import curriculum as cur
from . import evaluation as ev
from . import model as m
from . import objectives as obj
from . import svgplot

METRICS_HEADER = ("iteration,stage_len,critic_loss,gen_loss,penalty,"
                  "grad_norm_mean,teacher_ratio,wall_s,nan")


@dataclass
class RunRecord:
    config: cfgmod.ExperimentConfig
    out_dir: str
    diverged: bool
    iterations_done: int
    wall_s: float
    rows: list[obj.MetricsRow]
    final_eval: ev.EvalReport | None
    novelty_training: float | None


class LengthSampler:
    """Serves (count, length) blocks of real token ids.

    Sentences are held content-only (no end marker), sorted longest first;
    a request for length L draws uniformly among sentences of length >= L
    and takes their first L tokens, so every served row is a real prefix.
    """

    def __init__(self, corpus: corp.TokenizedCorpus):
        eos = corpus.vocab.eos_id
        pad = corpus.vocab.pad_id
        rows = [np.array([t for t in s if t != eos and t != pad], dtype=np.int64)
                for s in corpus.sentences]
        rows = [r for r in rows if r.size > 0]
        if not rows:
            raise corp.CorpusError("corpus has no content tokens")
        order = sorted(range(len(rows)), key=lambda i: (-rows[i].size, i))
        self.rows = [rows[i] for i in order]
        lengths = np.array([r.size for r in self.rows])
        self.max_length = int(lengths[0])
        # count_ge[L] = number of sentences with at least L content tokens
        self.count_ge = np.zeros(self.max_length + 1, dtype=np.int64)
        for L in range(1, self.max_length + 1):
            self.count_ge[L] = int(np.sum(lengths >= L))

    def __call__(self, length: int, count: int, rng: np.random.Generator) -> np.ndarray:
        if not 1 <= length <= self.max_length or self.count_ge[length] == 0:
            raise ValueError(f"no sentences of length >= {length}")
        idx = rng.integers(0, self.count_ge[length], size=count)
        return np.stack([self.rows[i][:length] for i in idx])


def _format_row(row: obj.MetricsRow) -> str:
    return ",".join([
        str(row.iteration), str(row.stage_len),
        repr(float(row.critic_loss)), repr(float(row.gen_loss)),
        repr(float(row.penalty)), repr(float(row.grad_norm_mean)),
        repr(float(row.teacher_ratio)), repr(float(row.wall_s)), str(row.nan),
    ])


def read_metrics(path: str) -> list[obj.MetricsRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(obj.MetricsRow(
                iteration=int(rec["iteration"]), stage_len=int(rec["stage_len"]),
                critic_loss=float(rec["critic_loss"]), gen_loss=float(rec["gen_loss"]),
                penalty=float(rec["penalty"]), grad_norm_mean=float(rec["grad_norm_mean"]),
                teacher_ratio=float(rec["teacher_ratio"]), wall_s=float(rec["wall_s"]),
                nan=int(rec["nan"]),
            ))
    return rows


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


def _build_pipeline(cfg: cfgmod.ExperimentConfig):
    lines = _read_lines(cfg.corpus_path)
    full = corp.ingest(lines, cfg.level, cfg.max_vocab, line_cap=cfg.line_cap)
    train, heldout = corp.partition(full, cfg.parts, cfg.seed)
    index = ev.build_index(heldout)
    sampler = LengthSampler(train)
    return full, train, heldout, index, sampler


def _make_schedule(cfg: cfgmod.ExperimentConfig, sampler: LengthSampler) -> cur.CurriculumSchedule:
    return cur.CurriculumSchedule(
        max_length=min(cfg.max_len, sampler.max_length),
        iterations_per_stage=cfg.iters_per_stage,
        variable_length=cfg.variable_len,
        teacher_ratio_start=cfg.teacher_start,
        teacher_decay=cfg.teacher_decay,
    )


def _fresh_state(cfg: cfgmod.ExperimentConfig, vocab_size: int,
                 schedule: cur.CurriculumSchedule) -> obj.TrainState:
    rng_init = np.random.default_rng([cfg.seed, 1])
    dtype = cfgmod.np_dtype(cfg)
    gen = m.init_generator(vocab_size, hidden_dim=cfg.hidden_dim, embed_dim=cfg.embed_dim,
                           noise_dim=cfg.noise_dim, cell_kind=cfg.cell, layers=cfg.layers,
                           rng=rng_init, dtype=dtype)
    crit = m.init_critic(vocab_size, hidden_dim=cfg.hidden_dim, embed_dim=cfg.embed_dim,
                         cell_kind=cfg.cell, layers=cfg.layers,
                         sigmoid_output=(cfg.mode == "gan"), rng=rng_init, dtype=dtype)
    opt_cfg = obj.OptimizerConfig(learning_rate=cfg.lr, beta1=cfg.beta1,
                                  beta2=cfg.beta2, epsilon=cfg.adam_eps)
    return obj.TrainState(
        generator=gen, critic=crit,
        gen_opt=obj.Adam(gen.parameters(), opt_cfg),
        critic_opt=obj.Adam(crit.parameters(), opt_cfg),
        mode=cfg.mode, lam=cfg.lam, clip_c=cfg.clip,
        n_critic=cfg.n_critic, batch_size=cfg.batch_size,
        rng=np.random.default_rng([cfg.seed, 2]),
        stage=cur.initial_stage(schedule),
        variable_length=cfg.variable_len,
    )


def _content_set(corpus: corp.TokenizedCorpus) -> set:
    pad, eos = corpus.vocab.pad_id, corpus.vocab.eos_id
    return {tuple(t for t in s if t != pad and t != eos) for s in corpus.sentences}


def _dump_samples(out_dir: str, iteration: int, gen: m.Generator, vocab: corp.Vocabulary,
                  level: str, length: int, count: int, seed: int, membership: set,
                  counters: dict[str, int]) -> None:
    rng = np.random.default_rng([seed, 4, iteration])
    samples = ev.draw_samples(gen, length, count, rng, vocab.eos_id)
    path = os.path.join(out_dir, "samples", f"iter_{iteration:06d}.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(corp.decode(vocab, s, level) + "\n")
    pad = vocab.pad_id
    for s in samples:
        counters["total"] += 1
        if tuple(t for t in s if t != pad) not in membership:
            counters["novel"] += 1


def _run_eval(out_dir: str, iteration: int, gen: m.Generator, vocab: corp.Vocabulary,
              index: ev.NGramIndex, train_corpus: corp.TokenizedCorpus,
              length: int, count: int, seed: int) -> ev.EvalReport:
    rng = np.random.default_rng([seed, 3, iteration])
    report = ev.evaluate(gen, vocab, index, train_corpus, length, rng, count)
    stem = os.path.join(out_dir, "eval", f"iter_{iteration:06d}")
    ev.write_report(report, stem + ".txt", stem + "_samples.txt", vocab, train_corpus.level)
    return report


def _ckpt_stem(out_dir: str, iteration: int) -> str:
    return os.path.join(out_dir, "checkpoints", f"iter_{iteration:06d}")


def _save_ckpt(out_dir: str, state: obj.TrainState, counters: dict[str, int]) -> None:
    ckpt.save_checkpoint(_ckpt_stem(out_dir, state.iteration), state,
                         {"novelty_novel": str(counters["novel"]),
                          "novelty_total": str(counters["total"])})


def _train_loop(cfg: cfgmod.ExperimentConfig, state: obj.TrainState,
                schedule: cur.CurriculumSchedule, sampler: LengthSampler,
                out_dir: str, metrics_fh, counters: dict[str, int], membership: set,
                vocab: corp.Vocabulary, index: ev.NGramIndex,
                train_corpus: corp.TokenizedCorpus, eval_len: int,
                final_eval: ev.EvalReport | None,
                last_eval_iter: int, last_ckpt_iter: int):
    diverged = False
    while state.iteration < cfg.iterations:
        t0 = time.perf_counter()
        row = obj.train_step(state, sampler)
        if cfg.wall_clock:
            row.wall_s = time.perf_counter() - t0
        state.stage = cur.advance(state.stage, state.iteration, schedule)
        metrics_fh.write(_format_row(row) + "\n")
        metrics_fh.flush()
        it = state.iteration
        if row.nan == 1 or abs(row.critic_loss) > cfg.divergence_bound:
            diverged = True
            break
        if it % cfg.sample_interval == 0:
            _dump_samples(out_dir, it, state.generator, vocab, train_corpus.level,
                          eval_len, cfg.sample_count, cfg.seed, membership, counters)
        if it % cfg.eval_interval == 0:
            final_eval = _run_eval(out_dir, it, state.generator, vocab, index,
                                   train_corpus, eval_len, cfg.eval_count, cfg.seed)
            last_eval_iter = it
        if it % cfg.checkpoint_interval == 0:
            _save_ckpt(out_dir, state, counters)
            last_ckpt_iter = it
    if not diverged:
        if state.iteration != last_eval_iter:
            final_eval = _run_eval(out_dir, state.iteration, state.generator, vocab,
                                   index, train_corpus, eval_len, cfg.eval_count, cfg.seed)
        if state.iteration != last_ckpt_iter:
            _save_ckpt(out_dir, state, counters)
    return diverged, final_eval


def _finish(cfg: cfgmod.ExperimentConfig, out_dir: str, state: obj.TrainState,
            diverged: bool, wall_s: float, counters: dict[str, int],
            final_eval: ev.EvalReport | None, eval_len: int) -> RunRecord:
    rows = read_metrics(os.path.join(out_dir, "metrics.csv"))
    if rows:
        emit_plots(rows, os.path.join(out_dir, "plots", "training.svg"))
    novelty = counters["novel"] / counters["total"] if counters["total"] else None
    summary = {
        "diverged": diverged,
        "iterations": state.iteration,
        "target_iterations": cfg.iterations,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "max_len_effective": eval_len,
        "wall_s": wall_s,
        "novelty_training": novelty,
        "novelty_samples": counters["total"],
        "final_eval": None if final_eval is None else {
            **{f"percent_in_test_{n}": final_eval.percent_in_test[n]
               for n in sorted(final_eval.percent_in_test)},
            "novelty": final_eval.novelty,
        },
    }
    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunRecord(config=cfg, out_dir=out_dir, diverged=diverged,
                     iterations_done=state.iteration, wall_s=wall_s, rows=rows,
                     final_eval=final_eval, novelty_training=novelty)


def _prepare_dirs(out_dir: str) -> None:
    for sub in ("", "samples", "eval", "checkpoints", "plots"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)


def run(cfg: cfgmod.ExperimentConfig) -> RunRecord:
    """Fresh training run into cfg.out; returns the completed record."""
    cfgmod.validate(cfg)
    t_start = time.perf_counter()
    out_dir = cfg.out
    _prepare_dirs(out_dir)
    full, train_c, heldout, index, sampler = _build_pipeline(cfg)
    schedule = _make_schedule(cfg, sampler)
    eval_len = schedule.max_length
    state = _fresh_state(cfg, full.vocab.size, schedule)

    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfgmod.to_ini(cfg))
    corp.export_vocab(full.vocab, os.path.join(out_dir, "vocab.txt"))

    membership = _content_set(train_c)
    counters = {"novel": 0, "total": 0}
    final_eval = _run_eval(out_dir, 0, state.generator, full.vocab, index,
                           train_c, eval_len, cfg.eval_count, cfg.seed)
    _save_ckpt(out_dir, state, counters)

    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        fh.flush()
        diverged, final_eval = _train_loop(
            cfg, state, schedule, sampler, out_dir, fh, counters, membership,
            full.vocab, index, train_c, eval_len, final_eval,
            last_eval_iter=0, last_ckpt_iter=0)
    return _finish(cfg, out_dir, state, diverged, time.perf_counter() - t_start,
                   counters, final_eval, eval_len)


def latest_checkpoint(out_dir: str) -> str:
    """Path stem of the newest checkpoint in a run directory."""
    manifests = glob.glob(os.path.join(out_dir, "checkpoints", "iter_*.manifest"))
    if not manifests:
        raise ckpt.CheckpointError(f"no checkpoints under {out_dir!r}")
    return max(manifests, key=lambda p: int(os.path.basename(p)[5:-9]))[:-len(".manifest")]


def _truncate_metrics(path: str, keep_up_to: int) -> None:
    rows = read_metrics(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(METRICS_HEADER + "\n")
        for row in rows:
            if row.iteration <= keep_up_to:
                fh.write(_format_row(row) + "\n")


def resume(out_dir: str) -> RunRecord:
    """Continue a run from its newest checkpoint to the configured
    iteration count; the appended metrics rows match an unbroken run."""
    t_start = time.perf_counter()
    cfg = cfgmod.load_config(os.path.join(out_dir, "config.ini"))
    cfg.out = out_dir
    full, train_c, heldout, index, sampler = _build_pipeline(cfg)
    schedule = _make_schedule(cfg, sampler)
    eval_len = schedule.max_length
    state = _fresh_state(cfg, full.vocab.size, schedule)

    extra = ckpt.load_checkpoint(latest_checkpoint(out_dir), state)
    counters = {"novel": int(extra.get("novelty_novel", "0")),
                "total": int(extra.get("novelty_total", "0"))}
    membership = _content_set(train_c)
    _truncate_metrics(os.path.join(out_dir, "metrics.csv"), state.iteration)

    with open(os.path.join(out_dir, "metrics.csv"), "a", encoding="utf-8", newline="\n") as fh:
        diverged, final_eval = _train_loop(
            cfg, state, schedule, sampler, out_dir, fh, counters, membership,
            full.vocab, index, train_c, eval_len, final_eval=None,
            last_eval_iter=-1, last_ckpt_iter=state.iteration)
    return _finish(cfg, out_dir, state, diverged, time.perf_counter() - t_start,
                   counters, final_eval, eval_len)


def evaluate_run(out_dir: str, count: int | None = None) -> ev.EvalReport:
    """Score the newest checkpoint of a finished run; writes a manual
    report beside the periodic ones and returns it."""
    cfg = cfgmod.load_config(os.path.join(out_dir, "config.ini"))
    cfg.out = out_dir
    full, train_c, heldout, index, sampler = _build_pipeline(cfg)
    schedule = _make_schedule(cfg, sampler)
    state = _fresh_state(cfg, full.vocab.size, schedule)
    ckpt.load_checkpoint(latest_checkpoint(out_dir), state)
    rng = np.random.default_rng([cfg.seed, 5, state.iteration])
    report = ev.evaluate(state.generator, full.vocab, index, train_c,
                         schedule.max_length, rng, count or cfg.eval_count)
    stem = os.path.join(out_dir, "eval", f"manual_{state.iteration:06d}")
    os.makedirs(os.path.dirname(stem), exist_ok=True)
    ev.write_report(report, stem + ".txt", stem + "_samples.txt", full.vocab, cfg.level)
    return report


def emit_plots(rows: list[obj.MetricsRow], out_path: str) -> None:
    """One SVG of training curves; all-zero optional series are left out."""
    xs = [r.iteration for r in rows]
    series = [
        ("critic loss", xs, [r.critic_loss for r in rows]),
        ("generator loss", xs, [r.gen_loss for r in rows]),
    ]
    for label, get in (("penalty", lambda r: r.penalty),
                       ("grad norm mean", lambda r: r.grad_norm_mean)):
        ys = [get(r) for r in rows]
        if any(math.isfinite(y) and y != 0.0 for y in ys):
            series.append((label, xs, ys))
    os.makedirs(os.path.dirname(out_path), exist_ok=True)
    svgplot.write_svg(out_path, svgplot.line_chart(
        series, title="training curves", x_label="iteration", y_label="value"))


@dataclass
class RunInfo:
    name: str
    out_dir: str
    mode: str
    diverged: bool
    rows: list[obj.MetricsRow]
    novelty_training: float | None
    final_eval: dict | None


def load_run(out_dir: str) -> RunInfo:
    cfg = cfgmod.load_config(os.path.join(out_dir, "config.ini"))
    with open(os.path.join(out_dir, "run.json"), encoding="utf-8") as fh:
        summary = json.load(fh)
    return RunInfo(
        name=os.path.basename(os.path.normpath(out_dir)),
        out_dir=out_dir,
        mode=cfg.mode,
        diverged=bool(summary["diverged"]),
        rows=read_metrics(os.path.join(out_dir, "metrics.csv")),
        novelty_training=summary.get("novelty_training"),
        final_eval=summary.get("final_eval"),
    )


def stability_stat(rows: list[obj.MetricsRow]) -> float:
    """Standard deviation of critic loss over the final quarter of rows."""
    if not rows:
        return math.nan
    tail = rows[-max(1, math.ceil(len(rows) * 0.25)):]
    return float(np.std([r.critic_loss for r in tail]))


def _smooth(ys: list[float], window: int = 9) -> list[float]:
    out = []
    acc = 0.0
    for i, y in enumerate(ys):
        acc += y
        if i >= window:
            acc -= ys[i - window]
        out.append(acc / min(i + 1, window))
    return out


def compare(run_dirs: list[str], out_dir: str) -> list[dict]:
    """Cross-run report: stability statistic, divergence, novelty, final
    metrics; writes a text table, a json dump, and an overlaid loss chart.
    Diverged runs are marked and drawn unsmoothed."""
    if len(run_dirs) < 2:
        raise ValueError("compare needs at least two runs")
    infos = sorted((load_run(d) for d in run_dirs), key=lambda r: r.name)

    ranges = []
    for info in infos:
        its = [r.iteration for r in info.rows]
        ranges.append((min(its), max(its)) if its else (0, 0))
    if max(lo for lo, _ in ranges) > min(hi for _, hi in ranges):
        raise ValueError("runs have disjoint iteration ranges")

    stats = []
    for info in infos:
        entry = {
            "run": info.name,
            "mode": info.mode,
            "iterations": max((r.iteration for r in info.rows), default=0),
            "diverged": info.diverged,
            "stability": stability_stat(info.rows),
            "novelty_training": info.novelty_training,
        }
        for n in (1, 2, 3, 4):
            key = f"percent_in_test_{n}"
            entry[key] = (info.final_eval or {}).get(key)
        stats.append(entry)

    os.makedirs(out_dir, exist_ok=True)
    fmt = lambda v: "-" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))
    cols = ["run", "mode", "iterations", "diverged", "stability",
            "novelty_training", "percent_in_test_1", "percent_in_test_2",
            "percent_in_test_3", "percent_in_test_4"]
    widths = {c: max(len(c), *(len(fmt(e[c])) for e in stats)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    for e in stats:
        lines.append("  ".join(fmt(e[c]).ljust(widths[c]) for c in cols))
    with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "comparison.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")

    series = []
    for info in infos:
        xs = [r.iteration for r in info.rows]
        ys = [r.critic_loss for r in info.rows]
        if info.diverged:
            series.append((f"{info.name} (diverged)", xs, ys))
        else:
            series.append((info.name, xs, _smooth(ys)))
    svgplot.write_svg(os.path.join(out_dir, "comparison.svg"), svgplot.line_chart(
        series, title="critic loss by run", x_label="iteration", y_label="critic loss"))
    return stats
