import numpy as np
import pytest

from textganlab import corpus as corp


@pytest.fixture(scope="session")
def synth_corpus_path(tmp_path_factory):
    """10k grammar sentences: the desk-scale training corpus."""
    path = tmp_path_factory.mktemp("corpus") / "synth10k.txt"
    sentences = corp.sample_pcfg(corp.default_grammar(), 10000, seed=1234, max_depth=50)
    path.write_text("\n".join(sentences) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def small_corpus_path(tmp_path_factory):
    """600 grammar sentences: enough for fast harness runs at parts=20."""
    path = tmp_path_factory.mktemp("corpus") / "small.txt"
    sentences = corp.sample_pcfg(corp.default_grammar(), 600, seed=77, max_depth=50)
    path.write_text("\n".join(sentences) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def tiny_corpus():
    lines = [
        "the cat sees the dog",
        "a dog likes the man",
        "the man feeds a bird today",
        "a big cat sees a dog",
        "the dog likes a big man",
        "a bird sees the cat quickly",
        "the cat and the dog",
        "a man feeds the cat",
    ]
    return corp.ingest(lines, "word", 64)


def make_rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(list(key))
