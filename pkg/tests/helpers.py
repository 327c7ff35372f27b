"""Shared test utilities: finite-difference oracles and error measures."""
from __future__ import annotations

import numpy as np


def fd_grad(f, arrays, eps: float = 1e-6):
    """Central finite-difference gradients of scalar f() w.r.t. numpy arrays.

    The arrays are perturbed in place and restored; f must recompute from
    their current contents on every call.
    """
    grads = []
    for a in arrays:
        g = np.zeros_like(a, dtype=np.float64)
        flat_a = a.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_a.size):
            orig = flat_a[i]
            flat_a[i] = orig + eps
            fp = float(f())
            flat_a[i] = orig - eps
            fm = float(f())
            flat_a[i] = orig
            flat_g[i] = (fp - fm) / (2.0 * eps)
        grads.append(g)
    return grads


def rel_err(a, b, floor: float = 1e-12) -> float:
    """Max absolute difference, scaled by the largest magnitude present.

    `floor` bounds the denominator; comparisons against finite differences
    should pass a floor above the FD truncation noise so an exactly-zero
    analytic gradient isn't flagged for ~1e-13 numerical dust.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(float(np.max(np.abs(a))), float(np.max(np.abs(b))), floor)
    return float(np.max(np.abs(a - b))) / denom


def brute_percent_in_test(samples, heldout_sentences, n, pad_id, eos_id) -> float:
    """Independent n-gram overlap: explicit substring scan, no set reuse."""
    def content(s):
        return [t for t in s if t != pad_id and t != eos_id]

    def ngrams(s):
        toks = content(s)
        return [tuple(toks[i:i + n]) for i in range(len(toks) - n + 1)]

    held = []
    for s in heldout_sentences:
        held.extend(ngrams(s))
    hits = 0
    total = 0
    for sample in samples:
        for g in ngrams(sample):
            total += 1
            if g in held:
                hits += 1
    return hits / total if total else 0.0


def brute_novelty(generated, corpus_sentences, pad_id, eos_id) -> float:
    def content(s):
        return tuple(t for t in s if t != pad_id and t != eos_id)

    known = [content(s) for s in corpus_sentences]
    novel = sum(1 for g in generated if content(g) not in known)
    return novel / len(generated)
