"""Tests for losses, the Adam optimizer, and the alternating train step."""
import math

import numpy as np
import pytest

from textganlab import autodiff as ad
from textganlab import curriculum as cur
from textganlab.model import init_critic, init_generator
from textganlab.objectives import (
    Adam,
    MetricsRow,
    NonFiniteGradientError,
    OptimizerConfig,
    TrainState,
    adam_step,
    gan_losses,
    train_step,
    wgan_losses,
)

from helpers import rel_err

VOCAB = 6


def token_sampler(length, count, rng):
    """Real-data stand-in: uniform ids over the non-reserved vocab range."""
    return rng.integers(3, VOCAB, size=(count, length))


def make_state(mode="wgan-lp", seed=0, n_critic=2, batch_size=4, lam=10.0,
               clip_c=0.01, teacher_ratio=0.0, lr=1e-3):
    rng = np.random.default_rng([seed, 1])
    gen = init_generator(VOCAB, hidden_dim=3, embed_dim=2, noise_dim=2, rng=rng)
    critic = init_critic(VOCAB, hidden_dim=3, embed_dim=2,
                         sigmoid_output=(mode == "gan"), rng=rng)
    opt_cfg = OptimizerConfig(learning_rate=lr)
    return TrainState(
        generator=gen,
        critic=critic,
        gen_opt=Adam(gen.parameters(), opt_cfg),
        critic_opt=Adam(critic.parameters(), opt_cfg),
        mode=mode,
        lam=lam,
        clip_c=clip_c,
        n_critic=n_critic,
        batch_size=batch_size,
        rng=np.random.default_rng([seed, 2]),
        stage=cur.Stage(current_max=3, teacher_ratio=teacher_ratio),
    )


# -- gan losses -------------------------------------------------------------

def test_gan_losses_at_half():
    closs, gloss = gan_losses([0.5], [0.5])
    assert closs == pytest.approx(2.0 * math.log(2.0), abs=1e-12)
    assert gloss == pytest.approx(math.log(2.0), abs=1e-12)


def test_gan_losses_perfect_discrimination_near_zero():
    closs, _ = gan_losses([1.0 - 1e-7], [1e-7])
    assert 0.0 <= closs <= 1e-6


def test_gan_generator_fully_fooling_near_zero():
    _, gloss = gan_losses([0.5], [1.0 - 1e-7])
    assert 0.0 <= gloss <= 1e-6


def test_gan_losses_clamp_extremes_finite():
    closs, gloss = gan_losses([0.0, 1.0], [0.0, 1.0])
    assert math.isfinite(closs) and math.isfinite(gloss)


def test_gan_losses_reject_out_of_range():
    with pytest.raises(ValueError, match="d_real"):
        gan_losses([1.2], [0.5])
    with pytest.raises(ValueError, match="d_fake"):
        gan_losses([0.5], [-0.1])


def test_gan_losses_tensor_route_matches_float_route():
    dr = np.array([0.3, 0.8])
    df = np.array([0.4, 0.6])
    ct, gt = gan_losses(ad.Tensor(dr), ad.Tensor(df))
    cf, gf = gan_losses(dr, df)
    assert float(ct.data) == pytest.approx(cf)
    assert float(gt.data) == pytest.approx(gf)


# -- wgan losses -------------------------------------------------------------

def test_wgan_losses_mean_arithmetic():
    closs, gloss = wgan_losses([2.0, 4.0], [1.0, 1.0], penalty=0.0)
    assert closs == pytest.approx(-2.0)
    assert gloss == pytest.approx(-1.0)


def test_wgan_losses_symmetry():
    vals = [0.3, -1.2, 5.0]
    closs, _ = wgan_losses(vals, vals, penalty=0.0)
    assert closs == pytest.approx(0.0)


def test_wgan_penalty_additivity():
    base, _ = wgan_losses([2.0, 4.0], [1.0, 1.0], penalty=0.0)
    shifted, _ = wgan_losses([2.0, 4.0], [1.0, 1.0], penalty=0.25)
    assert shifted == pytest.approx(base + 0.25)


def test_wgan_generator_loss_ignores_penalty():
    _, g0 = wgan_losses([1.0], [3.0], penalty=0.0)
    _, g1 = wgan_losses([1.0], [3.0], penalty=7.0)
    assert g0 == g1 == pytest.approx(-3.0)


def test_wgan_losses_tensor_route():
    fr = ad.Tensor(np.array([2.0, 4.0]))
    ff = ad.Tensor(np.array([1.0, 1.0]))
    closs, gloss = wgan_losses(fr, ff, penalty=0.5)
    assert float(closs.data) == pytest.approx(-1.5)
    assert float(gloss.data) == pytest.approx(-1.0)


# -- Adam ---------------------------------------------------------------------

def adam_reference(param, grads, lr, b1, b2, eps):
    """Independent textbook Adam, one parameter, sequential grads."""
    p = param.astype(np.float64).copy()
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return p


def test_adam_matches_reference_implementation():
    rng = np.random.default_rng(0)
    p0 = rng.standard_normal((3, 2))
    grads = [rng.standard_normal((3, 2)) for _ in range(7)]
    cfg = OptimizerConfig(learning_rate=0.01, beta1=0.5, beta2=0.9, epsilon=1e-8)
    tensor = ad.tensor(p0.copy(), requires_grad=True)
    opt = Adam({"w": tensor}, cfg)
    for g in grads:
        opt.step({"w": g})
    want = adam_reference(p0, grads, 0.01, 0.5, 0.9, 1e-8)
    assert rel_err(tensor.data, want) <= 1e-12
    assert opt.t == 7


def test_adam_zero_gradient_keeps_params():
    p = ad.tensor(np.array([1.0, -2.0]), requires_grad=True)
    opt = Adam({"w": p}, OptimizerConfig(learning_rate=0.5))
    opt.step({"w": np.zeros(2)})
    assert p.data.tolist() == [1.0, -2.0]


def test_adam_constant_gradient_approaches_signed_learning_rate():
    lr = 0.01
    p = ad.tensor(np.array([0.0, 0.0]), requires_grad=True)
    opt = Adam({"w": p}, OptimizerConfig(learning_rate=lr, beta1=0.5, beta2=0.9))
    g = np.array([3.0, -0.2])
    prev = p.data.copy()
    for _ in range(200):
        prev = p.data.copy()
        opt.step({"w": g})
    update = p.data - prev
    assert np.allclose(update, -lr * np.sign(g), rtol=1e-5)


def test_adam_accepts_tensor_gradients():
    p = ad.tensor(np.zeros(2), requires_grad=True)
    opt = Adam({"w": p}, OptimizerConfig(learning_rate=0.1))
    opt.step({"w": ad.Tensor(np.ones(2))})
    assert np.all(p.data < 0.0)


def test_adam_nonfinite_gradient_names_parameter():
    params = {"gen.out.W": ad.tensor(np.zeros(2), requires_grad=True)}
    opt = Adam(params, OptimizerConfig())
    with pytest.raises(NonFiniteGradientError, match="'gen.out.W'") as exc:
        adam_step(params, {"gen.out.W": np.array([1.0, np.nan])}, opt)
    assert exc.value.param_name == "gen.out.W"
    with pytest.raises(NonFiniteGradientError, match="non-finite gradient"):
        opt.step({"gen.out.W": np.array([np.inf, 0.0])})


def test_optimizer_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(beta1=1.0).check()
    with pytest.raises(ValueError):
        OptimizerConfig(learning_rate=0.0).check()


# -- TrainState ----------------------------------------------------------------

def test_train_state_rejects_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        make_state(mode="wgan-sn")


def test_train_state_enforces_sigmoid_coupling():
    state = make_state(mode="wgan-lp")
    state.critic.sigmoid_output = True
    with pytest.raises(ValueError, match="sigmoid"):
        TrainState(
            generator=state.generator, critic=state.critic,
            gen_opt=state.gen_opt, critic_opt=state.critic_opt,
            mode="wgan-lp", lam=10.0, clip_c=0.01, n_critic=1, batch_size=2,
            rng=np.random.default_rng(0), stage=cur.Stage(2, 0.0),
        )


def test_penalty_mode_mapping():
    assert make_state(mode="wgan-clip").penalty_mode().kind == "clip"
    assert make_state(mode="wgan-gp").penalty_mode().kind == "two-sided-gp"
    assert make_state(mode="wgan-lp").penalty_mode().kind == "one-sided-lp"
    assert make_state(mode="gan").penalty_mode() is None


# -- train_step -------------------------------------------------------------

def test_train_step_update_counts():
    state = make_state(n_critic=5)
    row = train_step(state, token_sampler)
    assert state.critic_opt.t == 5
    assert state.gen_opt.t == 1
    assert row.iteration == 1 and state.iteration == 1
    train_step(state, token_sampler)
    assert state.critic_opt.t == 10 and state.gen_opt.t == 2


def test_train_step_clip_mode_bounds_critic():
    state = make_state(mode="wgan-clip", clip_c=0.02)
    row = train_step(state, token_sampler)
    for t in state.critic.parameters().values():
        assert np.all(np.abs(t.data) <= 0.02)
    assert row.penalty == 0.0


def test_train_step_gan_mode_has_no_penalty():
    state = make_state(mode="gan")
    row = train_step(state, token_sampler)
    assert row.penalty == 0.0 and row.grad_norm_mean == 0.0
    assert math.isfinite(row.critic_loss) and math.isfinite(row.gen_loss)


@pytest.mark.parametrize("mode", ["wgan-gp", "wgan-lp"])
def test_train_step_penalty_modes_report_norms(mode):
    state = make_state(mode=mode, lam=10.0)
    row = train_step(state, token_sampler)
    assert row.grad_norm_mean > 0.0
    assert row.penalty >= 0.0
    assert row.nan == 0


def test_train_step_deterministic():
    rows_a = [train_step(make_state(seed=3), token_sampler) for _ in range(1)]
    state_a = make_state(seed=3)
    state_b = make_state(seed=3)
    for _ in range(3):
        ra = train_step(state_a, token_sampler)
        rb = train_step(state_b, token_sampler)
        assert ra == rb
    pa = state_a.generator.parameters()
    pb = state_b.generator.parameters()
    for name in pa:
        assert np.array_equal(pa[name].data, pb[name].data)


def test_train_step_nan_flag_on_poisoned_params():
    state = make_state()
    state.critic.w_out.data[...] = np.nan
    row = train_step(state, token_sampler)
    assert row.nan == 1
    assert row.iteration == 1  # iteration still advances so the row is loggable


def test_train_step_respects_teacher_ratio():
    # ratio 1.0 forces full prefixes; just assert the step runs and logs it
    state = make_state(teacher_ratio=1.0)
    row = train_step(state, token_sampler)
    assert row.teacher_ratio == 1.0
    assert row.nan == 0


def test_train_step_stage_length_cap():
    state = make_state()
    state.variable_length = False
    row = train_step(state, token_sampler)
    assert row.stage_len == 3


def test_metrics_row_field_order():
    assert MetricsRow.FIELDS == (
        "iteration", "stage_len", "critic_loss", "gen_loss", "penalty",
        "grad_norm_mean", "teacher_ratio", "wall_s", "nan",
    )


def test_gradients_of_full_critic_loss_match_finite_differences():
    # end-to-end: d/d(param) of [mean f_fake - mean f_real + one-sided penalty]
    from helpers import fd_grad
    from textganlab import lipschitz as lip
    from textganlab import model as m

    rng = np.random.default_rng(17)
    critic = init_critic(4, hidden_dim=4, embed_dim=3, rng=rng)
    real = np.eye(4)[rng.integers(0, 4, size=(3, 3))].astype(np.float64)
    fake = rng.dirichlet(np.ones(4), size=(3, 3))
    x_hat_np = lip.interpolate(real, fake, rng).x_hat

    params = critic.parameters()
    names = list(params)

    def loss_tensor():
        f_real = m.score_batch(critic, real)
        f_fake = m.score_batch(critic, fake)
        x_hat = ad.Tensor(x_hat_np)
        x_hat.requires_grad = True
        pen = lip.penalty_one_sided(lip.grad_norm_batch(critic, x_hat), 10.0)
        loss, _ = wgan_losses(f_real, f_fake, pen)
        return loss

    grads = ad.grad(loss_tensor(), [params[n] for n in names])
    fd = fd_grad(lambda: loss_tensor().item(), [params[n].data for n in names], eps=1e-5)
    for name, g, f in zip(names, grads, fd):
        # floor=1e-6 keeps FD truncation dust on exactly-zero gradients
        # (the critic output bias cancels between the two means) in scale
        assert rel_err(g.data, f, floor=1e-6) <= 1e-3, name
