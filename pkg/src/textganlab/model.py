"""Recurrent generator and critic over softmax-relaxed token sequences.

The generator emits one probability vector over the vocabulary per step
(continuous relaxation); real data enters the critic as one-hot rows.  Both
networks run on autodiff tensors so every score is differentiable with
respect to parameters and inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

GRU = "gru"
LSTM = "lstm"


class DimensionError(ValueError):
    pass


@dataclass
class RecurrentCellParams:
    """Gate parameters for one recurrent layer.

    Gate matrices are hidden_dim x input_dim, recurrent matrices
    hidden_dim x hidden_dim, biases hidden_dim.  GRU uses gates z, r, h;
    LSTM uses i, f, o, g.
    """

    kind: str
    input_dim: int
    hidden_dim: int
    weights: dict[str, Tensor] = field(default_factory=dict)

    GRU_GATES = ("z", "r", "h")
    LSTM_GATES = ("i", "f", "o", "g")

    @property
    def gates(self) -> tuple[str, ...]:
        return self.GRU_GATES if self.kind == GRU else self.LSTM_GATES

    def check(self) -> None:
        for gate in self.gates:
            if self.weights[f"W{gate}"].shape != (self.hidden_dim, self.input_dim):
                raise DimensionError(f"W{gate} must be {(self.hidden_dim, self.input_dim)}")
            if self.weights[f"U{gate}"].shape != (self.hidden_dim, self.hidden_dim):
                raise DimensionError(f"U{gate} must be square {self.hidden_dim}")
            if self.weights[f"b{gate}"].shape != (self.hidden_dim,):
                raise DimensionError(f"b{gate} must have length {self.hidden_dim}")


def init_cell(kind: str, input_dim: int, hidden_dim: int, rng: np.random.Generator,
              dtype=np.float64) -> RecurrentCellParams:
    """Uniform [-k, k] weights with k = 1/sqrt(hidden_dim); zero biases."""
    if kind not in (GRU, LSTM):
        raise ValueError(f"unknown cell kind {kind!r}")
    k = 1.0 / np.sqrt(hidden_dim)
    cell = RecurrentCellParams(kind=kind, input_dim=input_dim, hidden_dim=hidden_dim)
    for gate in cell.gates:
        cell.weights[f"W{gate}"] = ad.tensor(
            rng.uniform(-k, k, size=(hidden_dim, input_dim)), requires_grad=True, dtype=dtype)
        cell.weights[f"U{gate}"] = ad.tensor(
            rng.uniform(-k, k, size=(hidden_dim, hidden_dim)), requires_grad=True, dtype=dtype)
        cell.weights[f"b{gate}"] = ad.tensor(np.zeros(hidden_dim), requires_grad=True, dtype=dtype)
    return cell


def _gate(cell: RecurrentCellParams, gate: str, x: Tensor, h: Tensor) -> Tensor:
    w = cell.weights
    return x @ w[f"W{gate}"].T + h @ w[f"U{gate}"].T + w[f"b{gate}"]


def gru_step(cell: RecurrentCellParams, x, h) -> Tensor:
    """One GRU step: h' = (1 - z) * h + z * h_tilde.

    x: (B, input_dim), h: (B, hidden_dim).  Accepts 1-d vectors as a batch
    of one.
    """
    if cell.kind != GRU:
        raise DimensionError(f"gru_step needs a GRU cell, got {cell.kind}")
    x, h, squeeze = _as_batch(x, h, cell)
    z = ad.sigmoid(_gate(cell, "z", x, h))
    r = ad.sigmoid(_gate(cell, "r", x, h))
    h_tilde = ad.tanh(x @ cell.weights["Wh"].T + (r * h) @ cell.weights["Uh"].T + cell.weights["bh"])
    out = (1.0 - z) * h + z * h_tilde
    return _maybe_squeeze(out, squeeze)


def lstm_step(cell: RecurrentCellParams, x, h, c) -> tuple[Tensor, Tensor]:
    """One LSTM step: c' = f*c + i*g, h' = o*tanh(c')."""
    if cell.kind != LSTM:
        raise DimensionError(f"lstm_step needs an LSTM cell, got {cell.kind}")
    x, h, squeeze = _as_batch(x, h, cell)
    c = ad.as_tensor(c)
    if c.ndim == 1:
        c = c.reshape((1, -1))
    if c.shape != h.shape:
        raise DimensionError(f"cell state shape {c.shape} != hidden shape {h.shape}")
    i = ad.sigmoid(_gate(cell, "i", x, h))
    f = ad.sigmoid(_gate(cell, "f", x, h))
    o = ad.sigmoid(_gate(cell, "o", x, h))
    g = ad.tanh(_gate(cell, "g", x, h))
    c_new = f * c + i * g
    h_new = o * ad.tanh(c_new)
    return _maybe_squeeze(h_new, squeeze), _maybe_squeeze(c_new, squeeze)


def _as_batch(x, h, cell: RecurrentCellParams):
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    squeeze = x.ndim == 1
    if squeeze:
        x = x.reshape((1, -1))
    if h.ndim == 1:
        h = h.reshape((1, -1))
    if x.shape[1] != cell.input_dim:
        raise DimensionError(f"input width {x.shape[1]} != cell input_dim {cell.input_dim}")
    if h.shape[1] != cell.hidden_dim:
        raise DimensionError(f"hidden width {h.shape[1]} != cell hidden_dim {cell.hidden_dim}")
    if x.shape[0] != h.shape[0]:
        raise DimensionError(f"batch sizes differ: x {x.shape[0]}, h {h.shape[0]}")
    return x, h, squeeze


def _maybe_squeeze(t: Tensor, squeeze: bool) -> Tensor:
    return t.reshape((-1,)) if squeeze else t


def cell_step(cell: RecurrentCellParams, x, state):
    """Uniform step interface: state is h for GRU, (h, c) for LSTM."""
    if cell.kind == GRU:
        return gru_step(cell, x, state)
    h, c = state
    return lstm_step(cell, x, h, c)


def init_state(cell: RecurrentCellParams, h0: Tensor):
    if cell.kind == GRU:
        return h0
    return (h0, ad.Tensor(np.zeros_like(h0.data)))


def state_h(cell: RecurrentCellParams, state) -> Tensor:
    return state if cell.kind == GRU else state[0]


@dataclass
class SoftSequence:
    """T probability vectors of width V (the generator's relaxed output)."""

    steps: np.ndarray  # (T, V)

    @property
    def length(self) -> int:
        return self.steps.shape[0]

    @property
    def width(self) -> int:
        return self.steps.shape[1]

    def check(self, tol: float = 1e-6) -> None:
        if np.any(self.steps < -tol):
            raise ValueError("negative probability in SoftSequence")
        sums = self.steps.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > tol):
            raise ValueError(f"step sums deviate from 1 by up to {np.abs(sums - 1.0).max():g}")


@dataclass
class Generator:
    cells: list[RecurrentCellParams]
    w_emb: Tensor    # (embed_dim, V): token-space input projection
    w_noise: Tensor  # (hidden_dim, noise_dim): maps z to the initial hidden state
    b_noise: Tensor
    w_out: Tensor    # (V, hidden_dim)
    b_out: Tensor
    noise_dim: int

    @property
    def vocab_size(self) -> int:
        return self.w_out.shape[0]

    def parameters(self) -> dict[str, Tensor]:
        return _collect_params("gen", self.cells, {
            "emb.W": self.w_emb, "noise.W": self.w_noise, "noise.b": self.b_noise,
            "out.W": self.w_out, "out.b": self.b_out,
        })


@dataclass
class Critic:
    cells: list[RecurrentCellParams]
    w_emb: Tensor  # (embed_dim, V)
    w_out: Tensor  # (1, hidden_dim)
    b_out: Tensor
    sigmoid_output: bool = False  # True only in GAN mode

    @property
    def vocab_size(self) -> int:
        return self.w_emb.shape[1]

    def parameters(self) -> dict[str, Tensor]:
        return _collect_params("critic", self.cells, {
            "emb.W": self.w_emb, "out.W": self.w_out, "out.b": self.b_out,
        })


def _collect_params(prefix: str, cells, extra: dict[str, Tensor]) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    for li, cell in enumerate(cells):
        for name, tensor in cell.weights.items():
            params[f"{prefix}.cell{li}.{name}"] = tensor
    for name, tensor in extra.items():
        params[f"{prefix}.{name}"] = tensor
    return params


def init_generator(vocab_size: int, hidden_dim: int, embed_dim: int, noise_dim: int,
                   cell_kind: str = GRU, layers: int = 1, rng: np.random.Generator | None = None,
                   dtype=np.float64) -> Generator:
    rng = rng if rng is not None else np.random.default_rng(0)
    k = 1.0 / np.sqrt(hidden_dim)
    cells = [
        init_cell(cell_kind, embed_dim if li == 0 else hidden_dim, hidden_dim, rng, dtype)
        for li in range(layers)
    ]
    return Generator(
        cells=cells,
        w_emb=ad.tensor(rng.uniform(-k, k, size=(embed_dim, vocab_size)), requires_grad=True, dtype=dtype),
        w_noise=ad.tensor(rng.uniform(-k, k, size=(hidden_dim, noise_dim)), requires_grad=True, dtype=dtype),
        b_noise=ad.tensor(np.zeros(hidden_dim), requires_grad=True, dtype=dtype),
        w_out=ad.tensor(rng.uniform(-k, k, size=(vocab_size, hidden_dim)), requires_grad=True, dtype=dtype),
        b_out=ad.tensor(np.zeros(vocab_size), requires_grad=True, dtype=dtype),
        noise_dim=noise_dim,
    )


def init_critic(vocab_size: int, hidden_dim: int, embed_dim: int, cell_kind: str = GRU,
                layers: int = 1, sigmoid_output: bool = False,
                rng: np.random.Generator | None = None, dtype=np.float64) -> Critic:
    rng = rng if rng is not None else np.random.default_rng(0)
    k = 1.0 / np.sqrt(hidden_dim)
    cells = [
        init_cell(cell_kind, embed_dim if li == 0 else hidden_dim, hidden_dim, rng, dtype)
        for li in range(layers)
    ]
    return Critic(
        cells=cells,
        w_emb=ad.tensor(rng.uniform(-k, k, size=(embed_dim, vocab_size)), requires_grad=True, dtype=dtype),
        w_out=ad.tensor(rng.uniform(-k, k, size=(1, hidden_dim)), requires_grad=True, dtype=dtype),
        b_out=ad.tensor(np.zeros(1), requires_grad=True, dtype=dtype),
        sigmoid_output=sigmoid_output,
    )


def rollout(gen: Generator, z, length: int, teacher_tokens=None, teacher_mask=None,
            prefix_len: int = 0) -> Tensor:
    """Batched autoregressive rollout; returns a (B, T, V) tensor of step
    probability vectors.

    z: (B, noise_dim).  The initial hidden state of layer 0 is
    tanh(z @ Wn.T + bn); deeper layers start at zero.  Step 0 feeds a zero
    vector; later steps feed the previous step's softmax output.  For the
    first `prefix_len` steps, samples selected by `teacher_mask` (B,)
    receive the one-hot of `teacher_tokens` (B, >=prefix_len) instead.
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    z = ad.as_tensor(z)
    if z.ndim == 1:
        z = z.reshape((1, -1))
    if z.shape[1] != gen.noise_dim:
        raise DimensionError(f"noise width {z.shape[1]} != noise_dim {gen.noise_dim}")
    batch = z.shape[0]
    V = gen.vocab_size

    if prefix_len > 0:
        if teacher_tokens is None:
            raise ValueError("prefix_len > 0 requires teacher_tokens")
        if prefix_len > length:
            raise ValueError(f"teacher prefix length {prefix_len} exceeds rollout length {length}")
        onehots = np.zeros((batch, prefix_len, V), dtype=z.data.dtype)
        idx = np.asarray(teacher_tokens)[:, :prefix_len]
        onehots[np.arange(batch)[:, None], np.arange(prefix_len)[None, :], idx] = 1.0
        if teacher_mask is None:
            mask = np.ones((batch, 1), dtype=z.data.dtype)
        else:
            mask = np.asarray(teacher_mask, dtype=z.data.dtype).reshape(batch, 1)

    h0 = ad.tanh(z @ gen.w_noise.T + gen.b_noise)
    states = [init_state(cell, h0 if li == 0 else ad.Tensor(np.zeros_like(h0.data)))
              for li, cell in enumerate(gen.cells)]

    prev = ad.Tensor(np.zeros((batch, V), dtype=z.data.dtype))
    steps: list[Tensor] = []
    for t in range(length):
        x_v = prev
        if prefix_len > 0 and t < prefix_len:
            forced = ad.Tensor(onehots[:, t, :])
            x_v = mask * forced + (1.0 - mask) * x_v
        x = x_v @ gen.w_emb.T
        for li, cell in enumerate(gen.cells):
            states[li] = cell_step(cell, x, states[li])
            x = state_h(cell, states[li])
        p = ad.softmax(x @ gen.w_out.T + gen.b_out, axis=-1)
        steps.append(p)
        prev = p
    return ad.stack(steps, axis=1)


def generate(gen: Generator, z, length: int, teacher_prefix=None,
             rng: np.random.Generator | None = None) -> SoftSequence:
    """Single-sequence rollout returning a SoftSequence (numpy, no graph)."""
    prefix_len = 0
    teacher = None
    if teacher_prefix is not None and len(teacher_prefix) > 0:
        prefix_len = len(teacher_prefix)
        teacher = np.asarray(teacher_prefix, dtype=np.int64).reshape(1, -1)
    with ad.no_grad():
        out = rollout(gen, np.asarray(z).reshape(1, -1), length,
                      teacher_tokens=teacher, prefix_len=prefix_len)
    return SoftSequence(steps=out.data[0])


def score_batch(critic: Critic, x) -> Tensor:
    """Critic scores for a (B, T, V) batch of soft (or one-hot) sequences."""
    x = ad.as_tensor(x)
    if x.ndim != 3:
        raise DimensionError(f"score_batch expects (B, T, V), got {x.shape}")
    if x.shape[2] != critic.vocab_size:
        raise DimensionError(f"sequence width {x.shape[2]} != critic vocab {critic.vocab_size}")
    batch, length, _ = x.shape
    hidden = critic.cells[0].hidden_dim
    states = [init_state(cell, ad.Tensor(np.zeros((batch, hidden), dtype=x.data.dtype)))
              for cell in critic.cells]
    h = None
    for t in range(length):
        inp = x[:, t, :] @ critic.w_emb.T
        for li, cell in enumerate(critic.cells):
            states[li] = cell_step(cell, inp, states[li])
            inp = state_h(cell, states[li])
        h = inp
    score = (h @ critic.w_out.T + critic.b_out).reshape((-1,))
    if critic.sigmoid_output:
        score = ad.sigmoid(score)
    return score


def critic_score(critic: Critic, seq: SoftSequence) -> float:
    """Scalar critic score of one sequence (sigmoid applied in GAN mode)."""
    steps = seq.steps if isinstance(seq, SoftSequence) else np.asarray(seq)
    with ad.no_grad():
        out = score_batch(critic, steps[None, :, :])
    return float(out.data[0])


def sample_hard(seq: SoftSequence, mode: str = "argmax",
                rng: np.random.Generator | None = None, eos_id: int | None = None) -> list[int]:
    """Discretize a SoftSequence; truncates at the first eos_id if given.

    argmax breaks ties toward the lowest id; multinomial needs `rng`.
    """
    steps = seq.steps if isinstance(seq, SoftSequence) else np.asarray(seq)
    ids: list[int] = []
    for row in steps:
        if mode == "argmax":
            tok = int(np.argmax(row))
        elif mode == "multinomial":
            if rng is None:
                raise ValueError("multinomial sampling requires an rng")
            p = np.clip(row, 0.0, None)
            p = p / p.sum()
            tok = int(rng.choice(len(row), p=p))
        else:
            raise ValueError(f"unknown sampling mode {mode!r}")
        if eos_id is not None and tok == eos_id:
            break
        ids.append(tok)
    return ids
