"""Loss functions and the alternating optimization loop.

Four regimes: the saturating minimax game with a sigmoid discriminator
("gan"), and the Wasserstein objective with weight clipping ("wgan-clip"),
two-sided gradient penalty ("wgan-gp"), or one-sided Lipschitz penalty
("wgan-lp").  In GAN mode the generator minimizes the standard
non-saturating surrogate -E[log D(x_hat)] instead of the literal
E[log(1 - D(x_hat))], which stalls early training.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import curriculum as cur
from . import lipschitz as lip
from . import model as m
from .autodiff import Tensor
from .corpus import one_hot

MODES = ("gan", "wgan-clip", "wgan-gp", "wgan-lp")

# floor inside logs so perfect discrimination doesn't produce -inf
PROB_EPS = 1e-7


class NonFiniteGradientError(RuntimeError):
    def __init__(self, param_name: str):
        super().__init__(f"non-finite gradient for parameter {param_name!r}")
        self.param_name = param_name


@dataclass
class OptimizerConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8

    def check(self) -> None:
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class Adam:
    """Bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], config: OptimizerConfig):
        config.check()
        self.params = params
        self.config = config
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        c = self.config
        self.t += 1
        for name in self.params:
            g = grads[name]
            g = g.data if isinstance(g, Tensor) else np.asarray(g)
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
            self.m[name] = c.beta1 * self.m[name] + (1 - c.beta1) * g
            self.v[name] = c.beta2 * self.v[name] + (1 - c.beta2) * g * g
            m_hat = self.m[name] / (1 - c.beta1**self.t)
            v_hat = self.v[name] / (1 - c.beta2**self.t)
            self.params[name].data -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.epsilon)


def adam_step(params: dict[str, Tensor], grads: dict, opt: Adam) -> None:
    """Single optimizer step; raises NonFiniteGradientError on bad grads."""
    assert opt.params is params
    opt.step(grads)


def _neg_mean_log(x: Tensor) -> Tensor:
    return -ad.mean(ad.log(ad.clip(x, PROB_EPS, 1.0 - PROB_EPS)))


def gan_losses(d_real, d_fake) -> tuple:
    """Minimax losses for a sigmoid discriminator.

    critic_loss = -E[log D(x)] - E[log(1 - D(x_hat))];
    generator_loss = -E[log D(x_hat)] (non-saturating surrogate).
    """
    dr = d_real if isinstance(d_real, Tensor) else ad.Tensor(np.asarray(d_real, dtype=np.float64))
    df = d_fake if isinstance(d_fake, Tensor) else ad.Tensor(np.asarray(d_fake, dtype=np.float64))
    for name, t in (("d_real", dr), ("d_fake", df)):
        if np.any(t.data < 0) or np.any(t.data > 1):
            raise ValueError(f"{name} values must lie in [0, 1]")
    critic_loss = _neg_mean_log(dr) + _neg_mean_log(1.0 - df)
    generator_loss = _neg_mean_log(df)
    if isinstance(d_real, Tensor) or isinstance(d_fake, Tensor):
        return critic_loss, generator_loss
    return float(critic_loss.data), float(generator_loss.data)


def wgan_losses(f_real, f_fake, penalty=0.0) -> tuple:
    """critic_loss = E[f(x_hat)] - E[f(x)] + penalty; generator_loss = -E[f(x_hat)]."""
    fr = f_real if isinstance(f_real, Tensor) else ad.Tensor(np.asarray(f_real, dtype=np.float64))
    ff = f_fake if isinstance(f_fake, Tensor) else ad.Tensor(np.asarray(f_fake, dtype=np.float64))
    pen = penalty if isinstance(penalty, Tensor) else float(penalty)
    critic_loss = ad.mean(ff) - ad.mean(fr) + pen
    generator_loss = -ad.mean(ff)
    if isinstance(f_real, Tensor) or isinstance(f_fake, Tensor) or isinstance(penalty, Tensor):
        return critic_loss, generator_loss
    return float(critic_loss.data), float(generator_loss.data)


@dataclass
class TrainState:
    """Everything the alternating loop mutates, in one place."""

    generator: m.Generator
    critic: m.Critic
    gen_opt: Adam
    critic_opt: Adam
    mode: str
    lam: float
    clip_c: float
    n_critic: int
    batch_size: int
    rng: np.random.Generator
    stage: cur.Stage
    variable_length: bool = True
    iteration: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if (self.mode == "gan") != self.critic.sigmoid_output:
            raise ValueError("critic sigmoid_output must be set iff mode is 'gan'")

    def penalty_mode(self) -> lip.PenaltyMode | None:
        if self.mode == "wgan-clip":
            return lip.PenaltyMode.clip(self.clip_c)
        if self.mode == "wgan-gp":
            return lip.PenaltyMode.two_sided_gp(self.lam)
        if self.mode == "wgan-lp":
            return lip.PenaltyMode.one_sided_lp(self.lam)
        return None


@dataclass
class MetricsRow:
    iteration: int
    stage_len: int
    critic_loss: float
    gen_loss: float
    penalty: float
    grad_norm_mean: float
    teacher_ratio: float
    wall_s: float = 0.0
    nan: int = 0

    FIELDS = ("iteration", "stage_len", "critic_loss", "gen_loss", "penalty",
              "grad_norm_mean", "teacher_ratio", "wall_s", "nan")


def _teacher_inputs(state: TrainState, sampler, length: int):
    """Per-sample teacher forcing: each sample is helped with probability
    teacher_ratio; helped samples get the first ceil(ratio*length) tokens of
    a real sentence as forced inputs."""
    ratio = state.stage.teacher_ratio
    if ratio <= 0.0:
        return None, None, 0
    prefix_len = min(length, math.ceil(ratio * length))
    mask = (state.rng.random(state.batch_size) < ratio).astype(np.float64)
    teacher = sampler(length, state.batch_size, state.rng)
    return teacher, mask, prefix_len


def _fake_batch(state: TrainState, sampler, length: int, with_graph: bool):
    z = state.rng.standard_normal((state.batch_size, state.generator.noise_dim))
    teacher, mask, prefix_len = _teacher_inputs(state, sampler, length)
    if with_graph:
        return m.rollout(state.generator, z, length, teacher_tokens=teacher,
                         teacher_mask=mask, prefix_len=prefix_len)
    with ad.no_grad():
        return m.rollout(state.generator, z, length, teacher_tokens=teacher,
                         teacher_mask=mask, prefix_len=prefix_len)


def _real_batch(state: TrainState, sampler, length: int) -> np.ndarray:
    ids = sampler(length, state.batch_size, state.rng)
    V = state.generator.vocab_size
    flat = one_hot(ids.reshape(-1), V)
    return flat.reshape(state.batch_size, length, V)


def _critic_update(state: TrainState, sampler) -> tuple[float, float, float]:
    """One critic step; returns (loss, penalty value, mean gradient norm)."""
    length = cur.sample_length(state.stage, state.variable_length, state.rng)
    real = _real_batch(state, sampler, length)
    fake = _fake_batch(state, sampler, length, with_graph=False)

    pen_value = 0.0
    norm_mean = 0.0
    if state.mode == "gan":
        d_real = m.score_batch(state.critic, real)
        d_fake = m.score_batch(state.critic, fake.data)
        critic_loss, _ = gan_losses(d_real, d_fake)
    else:
        f_real = m.score_batch(state.critic, real)
        f_fake = m.score_batch(state.critic, fake.data)
        penalty = 0.0
        if state.mode in ("wgan-gp", "wgan-lp"):
            inter = lip.interpolate(real, fake.data, state.rng)
            x_hat = ad.Tensor(inter.x_hat)
            x_hat.requires_grad = True
            norms = lip.grad_norm_batch(state.critic, x_hat)
            if state.mode == "wgan-gp":
                penalty = lip.penalty_two_sided(norms, state.lam)
            else:
                penalty = lip.penalty_one_sided(norms, state.lam)
            pen_value = float(penalty.data)
            norm_mean = float(norms.data.mean())
        critic_loss, _ = wgan_losses(f_real, f_fake, penalty)

    params = state.critic.parameters()
    names = list(params)
    grads = ad.grad(critic_loss, [params[n] for n in names])
    state.critic_opt.step({n: g for n, g in zip(names, grads)})
    if state.mode == "wgan-clip":
        lip.clip_weights(params, state.clip_c)
    return float(critic_loss.data), pen_value, norm_mean


def _generator_update(state: TrainState, sampler) -> float:
    length = cur.sample_length(state.stage, state.variable_length, state.rng)
    fake = _fake_batch(state, sampler, length, with_graph=True)
    scores = m.score_batch(state.critic, fake)
    if state.mode == "gan":
        gen_loss = _neg_mean_log(scores)
    else:
        gen_loss = -ad.mean(scores)
    params = state.generator.parameters()
    names = list(params)
    grads = ad.grad(gen_loss, [params[n] for n in names])
    state.gen_opt.step({n: g for n, g in zip(names, grads)})
    return float(gen_loss.data)


def train_step(state: TrainState, sampler) -> MetricsRow:
    """n_critic critic updates followed by one generator update.

    `sampler(length, count, rng)` must yield (count, length) arrays of real
    token ids.  A non-finite gradient anywhere sets the row's NaN flag and
    leaves the remaining updates unapplied.
    """
    closses: list[float] = []
    pens: list[float] = []
    norms: list[float] = []
    gen_loss = math.nan
    nan_flag = 0
    try:
        for _ in range(state.n_critic):
            closs, pen, norm = _critic_update(state, sampler)
            closses.append(closs)
            pens.append(pen)
            norms.append(norm)
        gen_loss = _generator_update(state, sampler)
    except NonFiniteGradientError:
        nan_flag = 1
    state.iteration += 1
    mean = lambda xs: float(np.mean(xs)) if xs else math.nan
    row = MetricsRow(
        iteration=state.iteration,
        stage_len=state.stage.current_max,
        critic_loss=mean(closses),
        gen_loss=gen_loss,
        penalty=mean(pens),
        grad_norm_mean=mean(norms),
        teacher_ratio=state.stage.teacher_ratio,
        nan=nan_flag,
    )
    if not (math.isfinite(row.critic_loss) and math.isfinite(row.gen_loss)):
        row.nan = 1
    return row
