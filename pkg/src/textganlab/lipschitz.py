"""Lipschitz enforcement for the critic: weight clipping, the two-sided
gradient penalty, and the weaker one-sided penalty.

The penalty sampling distribution is realized as uniform interpolation on
segments between paired real and generated sequences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import model as m
from .autodiff import Tensor

# keeps sqrt differentiable at zero gradient norm
NORM_EPS = 1e-12

CLIP = "clip"
TWO_SIDED_GP = "two-sided-gp"
ONE_SIDED_LP = "one-sided-lp"


@dataclass(frozen=True)
class PenaltyMode:
    """Tagged choice among Clip(c), TwoSidedGP(lambda), OneSidedLP(lambda)."""

    kind: str
    value: float  # c for clip, lambda for the penalties

    def __post_init__(self):
        if self.kind not in (CLIP, TWO_SIDED_GP, ONE_SIDED_LP):
            raise ValueError(f"unknown penalty mode {self.kind!r}")
        if self.value <= 0:
            raise ValueError(f"{self.kind} parameter must be positive, got {self.value}")

    @classmethod
    def clip(cls, c: float) -> "PenaltyMode":
        return cls(CLIP, c)

    @classmethod
    def two_sided_gp(cls, lam: float) -> "PenaltyMode":
        return cls(TWO_SIDED_GP, lam)

    @classmethod
    def one_sided_lp(cls, lam: float) -> "PenaltyMode":
        return cls(ONE_SIDED_LP, lam)


@dataclass
class InterpolantBatch:
    """Points on segments between paired real and fake sequences."""

    x_hat: np.ndarray    # (B, T, V)
    epsilons: np.ndarray  # (B,) in [0, 1]


def interpolate(real: np.ndarray, fake: np.ndarray, rng: np.random.Generator) -> InterpolantBatch:
    """Per sample draw eps ~ U[0,1]; x_hat = eps*real + (1-eps)*fake."""
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError(f"shape mismatch: real {real.shape} vs fake {fake.shape}")
    eps = rng.uniform(0.0, 1.0, size=real.shape[0])
    e = eps[:, None, None]
    return InterpolantBatch(x_hat=e * real + (1.0 - e) * fake, epsilons=eps)


def _score_fn(critic):
    """Per-sample scoring function for a Critic or a callable probe."""
    if isinstance(critic, m.Critic):
        if critic.sigmoid_output:
            raise ValueError("penalty undefined for sigmoid critic")
        return lambda x: m.score_batch(critic, x)
    if callable(critic):
        return critic
    raise TypeError(f"expected Critic or callable, got {type(critic)!r}")


def grad_norm_batch(critic, x_hat: Tensor) -> Tensor:
    """Per-sample L2 norm of d score / d x_hat, differentiable in both the
    critic parameters and x_hat (reverse-over-reverse)."""
    score = _score_fn(critic)
    if not x_hat.requires_grad:
        raise ValueError("x_hat must require grad")
    s = score(x_hat)
    # samples are independent, so the gradient of the summed score is the
    # stack of per-sample gradients
    (g,) = ad.grad(s.sum(), [x_hat], create_graph=True)
    return (ad.sum_(g * g, axis=(1, 2)) + NORM_EPS) ** 0.5


def grad_norm(critic, seq):
    """Gradient norm(s) of the critic score with respect to the input.

    Accepts a single SoftSequence / (T, V) array (returns a float) or a
    (B, T, V) batch (returns a (B,) array).
    """
    steps = seq.steps if isinstance(seq, m.SoftSequence) else np.asarray(seq, dtype=np.float64)
    single = steps.ndim == 2
    if single:
        steps = steps[None, :, :]
    leaf = ad.Tensor(steps.copy())
    leaf.requires_grad = True
    norms = grad_norm_batch(critic, leaf)
    return float(norms.data[0]) if single else norms.data.copy()


def _as_norm_tensor(norms) -> Tensor:
    t = norms if isinstance(norms, Tensor) else ad.Tensor(np.asarray(norms, dtype=np.float64))
    if t.size == 0:
        raise ValueError("empty batch of gradient norms")
    return t


def penalty_two_sided(norms, lam: float):
    """lam * mean((n - 1)^2): penalizes any deviation of the norm from 1."""
    t = _as_norm_tensor(norms)
    out = ad.mean((t - 1.0) * (t - 1.0)) * float(lam)
    return out if isinstance(norms, Tensor) else float(out.data)


def penalty_one_sided(norms, lam: float):
    """lam * mean(max(0, n - 1)^2): penalizes only norms above 1."""
    t = _as_norm_tensor(norms)
    excess = ad.relu(t - 1.0)
    out = ad.mean(excess * excess) * float(lam)
    return out if isinstance(norms, Tensor) else float(out.data)


def clip_weights(params, c: float) -> None:
    """Project every parameter value into [-c, c], in place."""
    if c <= 0:
        raise ValueError(f"clip bound must be positive, got {c}")
    tensors = params.values() if isinstance(params, dict) else params
    for t in tensors:
        np.clip(t.data, -c, c, out=t.data)
