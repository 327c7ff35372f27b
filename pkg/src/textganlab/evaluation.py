"""Held-out n-gram overlap metrics and the novelty score.

percent_in_test_n measures the fraction of n-gram occurrences in generated
samples (counted with multiplicity) that also occur contiguously in a
held-out corpus.  The novelty score is the fraction of generated sentences
not found verbatim in the training corpus.  Pad and end markers never
participate in n-grams on either side.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as m
from .corpus import TokenizedCorpus, Vocabulary

NGRAM_ORDERS = (1, 2, 3, 4)


@dataclass
class NGramIndex:
    grams: dict[int, set[tuple[int, ...]]]
    pad_id: int
    eos_id: int

    def content(self, sentence) -> tuple[int, ...]:
        return tuple(t for t in sentence if t != self.pad_id and t != self.eos_id)


def build_index(heldout: TokenizedCorpus, max_n: int = 4) -> NGramIndex:
    if not heldout.sentences:
        raise ValueError("empty corpus")
    index = NGramIndex(
        grams={n: set() for n in range(1, max_n + 1)},
        pad_id=heldout.vocab.pad_id,
        eos_id=heldout.vocab.eos_id,
    )
    for sent in heldout.sentences:
        toks = index.content(sent)
        for n in index.grams:
            for i in range(len(toks) - n + 1):
                index.grams[n].add(toks[i:i + n])
    return index


def percent_in_test_n(samples, index: NGramIndex, n: int) -> float:
    if n not in index.grams:
        raise ValueError(f"index holds orders {sorted(index.grams)}, not {n}")
    hits = 0
    total = 0
    members = index.grams[n]
    for sample in samples:
        toks = index.content(sample)
        for i in range(len(toks) - n + 1):
            total += 1
            if toks[i:i + n] in members:
                hits += 1
    return hits / total if total else 0.0


def novelty_score(generated, corpus: TokenizedCorpus) -> float:
    """Fraction of generated sentences (with multiplicity) absent from the
    corpus.  Comparison is over content tokens, ignoring pad/eos."""
    generated = list(generated)
    if not generated:
        raise ValueError("empty generated list")
    pad, eos = corpus.vocab.pad_id, corpus.vocab.eos_id
    strip = lambda s: tuple(t for t in s if t != pad and t != eos)
    known = {strip(s) for s in corpus.sentences}
    novel = sum(1 for g in generated if strip(g) not in known)
    return novel / len(generated)


@dataclass
class EvalReport:
    percent_in_test: dict[int, float]
    novelty: float
    sample_count: int
    samples: list[tuple[int, ...]]

    def check(self) -> None:
        for n, v in self.percent_in_test.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"percent_in_test[{n}] out of range: {v}")
        if not 0.0 <= self.novelty <= 1.0:
            raise ValueError(f"novelty out of range: {self.novelty}")
        if self.sample_count != len(self.samples):
            raise ValueError("sample_count does not match samples")


def draw_samples(generator: m.Generator, length: int, count: int,
                 rng: np.random.Generator, eos_id: int) -> list[tuple[int, ...]]:
    out = []
    for _ in range(count):
        z = rng.standard_normal(generator.noise_dim)
        seq = m.generate(generator, z, length)
        out.append(m.sample_hard(seq, mode="argmax", eos_id=eos_id))
    return out


def evaluate(generator: m.Generator, vocab: Vocabulary, index: NGramIndex,
             corpus: TokenizedCorpus, length: int, rng: np.random.Generator,
             count: int = 640) -> EvalReport:
    """Scores `count` argmax-decoded sequences of the given length."""
    samples = draw_samples(generator, length, count, rng, vocab.eos_id)
    report = EvalReport(
        percent_in_test={n: percent_in_test_n(samples, index, n) for n in NGRAM_ORDERS},
        novelty=novelty_score(samples, corpus),
        sample_count=len(samples),
        samples=samples,
    )
    report.check()
    return report


def format_report(report: EvalReport) -> str:
    lines = []
    for n in sorted(report.percent_in_test):
        lines.append(f"percent_in_test_{n}={report.percent_in_test[n]!r}")
    lines.append(f"novelty={report.novelty!r}")
    lines.append(f"sample_count={report.sample_count}")
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, report_path, samples_path, vocab: Vocabulary,
                 level: str = "word") -> None:
    from .corpus import decode
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report(report))
    with open(samples_path, "w", encoding="utf-8", newline="\n") as fh:
        for s in report.samples:
            fh.write(decode(vocab, s, level) + "\n")
