"""Corpus ingestion, vocabularies, partitioning, and synthetic PCFG corpora.

Input corpora are UTF-8 text, one sentence per line.  Word-level tokens are
split on ASCII whitespace with no case folding; character-level tokens are
the line's characters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

UNK = "[unk]"
PAD = "[pad]"
EOS = "[eos]"


class CorpusError(ValueError):
    pass


@dataclass
class Vocabulary:
    """Bidirectional token<->id map with reserved [unk]/[pad]/[eos] entries."""

    id_of: dict[str, int]
    token_of: list[str]
    unk_id: int
    pad_id: int
    eos_id: int

    @property
    def size(self) -> int:
        return len(self.token_of)

    def encode_token(self, token: str) -> int:
        return self.id_of.get(token, self.unk_id)

    def check(self) -> None:
        assert len(self.id_of) == len(self.token_of), "token map sizes disagree"
        for i, tok in enumerate(self.token_of):
            assert self.id_of[tok] == i, f"id_of/token_of mismatch at {i}"
        assert len({self.unk_id, self.pad_id, self.eos_id}) == 3


@dataclass
class TokenizedCorpus:
    """Deduplicated sentences as id tuples, each ending with eos_id."""

    sentences: list[tuple[int, ...]]
    vocab: Vocabulary
    level: str  # "word" | "character"


def tokenize_line(line: str, level: str) -> list[str]:
    if level == "word":
        return line.split()
    if level in ("character", "char"):
        return list(line)
    raise CorpusError(f"unknown tokenization level: {level!r}")


def ingest(lines, level: str = "word", max_vocab: int = 10000, line_cap: int = 10000) -> TokenizedCorpus:
    """Tokenize a line stream into a deduplicated, unk-mapped corpus.

    Exact duplicates (by token sequence) are dropped, first occurrence kept.
    Tokens are ranked by frequency (ties broken lexicographically); only the
    ``max_vocab - 3`` most frequent keep their own ids, the rest map to
    ``[unk]``.  Every sentence is terminated with ``[eos]``.
    """
    if max_vocab < 3:
        raise CorpusError(f"max_vocab must be >= 3 to hold the reserved tokens, got {max_vocab}")
    level = "character" if level == "char" else level

    seen: set[tuple[str, ...]] = set()
    token_sentences: list[tuple[str, ...]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        tokens = tokenize_line(line, level)
        if not tokens:
            continue
        if len(tokens) > line_cap:
            log.warning("line %d longer than cap (%d > %d tokens); truncating", lineno, len(tokens), line_cap)
            tokens = tokens[:line_cap]
        key = tuple(tokens)
        if key in seen:
            continue
        seen.add(key)
        token_sentences.append(key)

    if not token_sentences:
        raise CorpusError("empty corpus")

    counts: dict[str, int] = {}
    for sent in token_sentences:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    token_of = [UNK, PAD, EOS]
    id_of = {UNK: 0, PAD: 1, EOS: 2}
    for tok, _ in ranked:
        if len(token_of) >= max_vocab:
            break
        if tok in id_of:  # a literal "[unk]"/"[pad]"/"[eos]" in the text reuses its reserved id
            continue
        id_of[tok] = len(token_of)
        token_of.append(tok)
    vocab = Vocabulary(id_of=id_of, token_of=token_of, unk_id=0, pad_id=1, eos_id=2)

    encoded: list[tuple[int, ...]] = []
    seen_ids: set[tuple[int, ...]] = set()
    for sent in token_sentences:
        ids = tuple(vocab.encode_token(t) for t in sent) + (vocab.eos_id,)
        if ids in seen_ids:  # unk-mapping can collapse distinct sentences
            continue
        seen_ids.add(ids)
        encoded.append(ids)
    return TokenizedCorpus(sentences=encoded, vocab=vocab, level=level)


def ingest_file(path, level: str = "word", max_vocab: int = 10000, line_cap: int = 10000) -> TokenizedCorpus:
    with open(path, encoding="utf-8") as fh:
        return ingest(fh, level=level, max_vocab=max_vocab, line_cap=line_cap)


def decode(vocab: Vocabulary, ids, level: str = "word") -> str:
    """Render token ids back to text, dropping [pad]/[eos]."""
    toks = [vocab.token_of[i] for i in ids if i not in (vocab.pad_id, vocab.eos_id)]
    sep = " " if level == "word" else ""
    return sep.join(toks)


def render(corpus: TokenizedCorpus) -> list[str]:
    return [decode(corpus.vocab, s, corpus.level) for s in corpus.sentences]


def partition(corpus: TokenizedCorpus, parts: int, seed: int) -> tuple[TokenizedCorpus, TokenizedCorpus]:
    """Seeded shuffle, round-robin split; partition 0 is held out."""
    n = len(corpus.sentences)
    if parts < 2:
        raise CorpusError(f"parts must be >= 2, got {parts}")
    if parts > n:
        raise CorpusError(f"parts ({parts}) exceeds sentence count ({n})")
    order = np.random.default_rng(seed).permutation(n)
    buckets: list[list[tuple[int, ...]]] = [[] for _ in range(parts)]
    for pos, idx in enumerate(order):
        buckets[pos % parts].append(corpus.sentences[idx])
    heldout = TokenizedCorpus(buckets[0], corpus.vocab, corpus.level)
    train_sents: list[tuple[int, ...]] = []
    for b in buckets[1:]:
        train_sents.extend(b)
    train = TokenizedCorpus(train_sents, corpus.vocab, corpus.level)
    return train, heldout


def one_hot(sentence, vocab_size: int) -> np.ndarray:
    """T x V one-hot matrix for a token-id sequence."""
    ids = np.asarray(sentence, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise CorpusError(f"token id out of range for vocab size {vocab_size}")
    out = np.zeros((len(ids), vocab_size), dtype=np.float64)
    out[np.arange(len(ids)), ids] = 1.0
    return out


def export_vocab(vocab: Vocabulary, path) -> None:
    """One token per line; line number equals the id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tok in vocab.token_of:
            fh.write(tok + "\n")


def load_vocab(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        token_of = [line.rstrip("\n") for line in fh]
    id_of = {tok: i for i, tok in enumerate(token_of)}
    for special in (UNK, PAD, EOS):
        if special not in id_of:
            raise CorpusError(f"vocabulary file missing reserved token {special}")
    return Vocabulary(id_of=id_of, token_of=token_of, unk_id=id_of[UNK], pad_id=id_of[PAD], eos_id=id_of[EOS])


# -- probabilistic context-free grammars ---------------------------------

@dataclass
class Pcfg:
    """Weighted rewrite rules; a symbol is nonterminal iff it has rules."""

    rules: dict[str, list[tuple[float, tuple[str, ...]]]]
    start: str = "S"

    def check(self) -> None:
        if self.start not in self.rules:
            raise CorpusError(f"start symbol {self.start!r} has no rules")
        for nt, alts in self.rules.items():
            if not alts:
                raise CorpusError(f"nonterminal {nt!r} has no expansions")
            total = sum(w for w, _ in alts)
            if total <= 0 or any(w <= 0 for w, _ in alts):
                raise CorpusError(f"nonterminal {nt!r} needs positive weights")


def parse_pcfg(text: str, start: str = "S") -> Pcfg:
    """Parse "NONTERM weight -> sym sym ..." lines ('#' comments allowed)."""
    rules: dict[str, list[tuple[float, tuple[str, ...]]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3 or parts[2] != "->":
            raise CorpusError(f"grammar line {lineno}: expected 'NONTERM weight -> sym ...', got {raw!r}")
        nt = parts[0]
        try:
            weight = float(parts[1])
        except ValueError as err:
            raise CorpusError(f"grammar line {lineno}: bad weight {parts[1]!r}") from err
        rules.setdefault(nt, []).append((weight, tuple(parts[3:])))
    grammar = Pcfg(rules=rules, start=start)
    grammar.check()
    return grammar


def format_pcfg(grammar: Pcfg) -> str:
    lines = []
    for nt, alts in grammar.rules.items():
        for weight, expansion in alts:
            lines.append(f"{nt} {weight:g} -> {' '.join(expansion)}")
    return "\n".join(lines) + "\n"


def sample_pcfg(grammar: Pcfg, n: int, seed: int, max_depth: int = 30, max_retries: int = 1000) -> list[str]:
    """Sample n sentences top-down, rule choice proportional to weight.

    Derivations deeper than max_depth are rejected and resampled; a grammar
    that keeps exceeding the budget raises CorpusError.
    """
    grammar.check()
    rng = np.random.default_rng(seed)
    probs = {
        nt: np.array([w for w, _ in alts]) / sum(w for w, _ in alts)
        for nt, alts in grammar.rules.items()
    }

    def expand(symbol: str, depth: int, out: list[str]) -> None:
        if symbol not in grammar.rules:
            out.append(symbol)
            return
        if depth >= max_depth:
            raise _DepthExceeded()
        alts = grammar.rules[symbol]
        choice = int(rng.choice(len(alts), p=probs[symbol]))
        for sym in alts[choice][1]:
            expand(sym, depth + 1, out)

    sentences: list[str] = []
    for _ in range(n):
        for _attempt in range(max_retries):
            out: list[str] = []
            try:
                expand(grammar.start, 0, out)
            except _DepthExceeded:
                continue
            sentences.append(" ".join(out))
            break
        else:
            raise CorpusError(f"grammar failed to terminate within max_depth={max_depth} after {max_retries} tries")
    return sentences


class _DepthExceeded(Exception):
    pass


def default_grammar() -> Pcfg:
    """Small English-like grammar for desk-scale experiments.

    A handful of frequent terminals plus a tail of rare nouns, so a 1%
    held-out split misses most of the tail and n-gram overlap metrics have
    headroom between an untrained and a trained generator.
    """
    rare = [
        "zebu", "quark", "fjord", "glyph", "crypt", "nymph", "sphinx",
        "vortex", "wombat", "yucca", "zephyr", "banjo", "umbra", "ingot",
    ]
    rules = {
        "S": [(1.0, ("NP", "VP"))],
        "NP": [
            (0.50, ("Det", "N")),
            (0.29, ("Det", "Adj", "N")),
            (0.20, ("NP", "and", "NP")),
            (0.01, ("Det", "RareN")),
        ],
        "VP": [
            (0.25, ("V",)),
            (0.55, ("V", "NP")),
            (0.20, ("V", "NP", "Adv")),
        ],
        "Det": [(0.6, ("the",)), (0.4, ("a",))],
        "N": [(0.3, ("cat",)), (0.3, ("dog",)), (0.2, ("man",)), (0.2, ("bird",))],
        "Adj": [(1.0, ("big",))],
        "Adv": [(0.5, ("today",)), (0.5, ("quickly",))],
        "V": [(0.35, ("sees",)), (0.35, ("likes",)), (0.3, ("feeds",))],
        "RareN": [(1.0, (w,)) for w in rare],
    }
    return Pcfg(rules=rules, start="S")
