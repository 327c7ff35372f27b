"""Tests for recurrent cells, generator rollouts, and critic scoring."""
import numpy as np
import pytest

from textganlab import autodiff as ad
from textganlab.model import (
    Critic,
    DimensionError,
    Generator,
    RecurrentCellParams,
    SoftSequence,
    critic_score,
    generate,
    gru_step,
    init_cell,
    init_critic,
    init_generator,
    lstm_step,
    rollout,
    sample_hard,
    score_batch,
)

from helpers import fd_grad, rel_err


def zero_cell(kind: str, input_dim: int, hidden_dim: int) -> RecurrentCellParams:
    cell = init_cell(kind, input_dim, hidden_dim, np.random.default_rng(0))
    for t in cell.weights.values():
        t.data[...] = 0.0
    return cell


def zero_params(model) -> None:
    for t in model.parameters().values():
        t.data[...] = 0.0


# -- cell steps --------------------------------------------------------------

def test_gru_zero_params_halves_state():
    # z = r = sigmoid(0) = 0.5, candidate = tanh(0) = 0, so h' = 0.5 * h
    cell = zero_cell("gru", 1, 1)
    out = gru_step(cell, np.zeros(1), np.array([0.8]))
    assert np.allclose(out.data, [0.4])


def test_gru_zero_params_zero_state():
    cell = zero_cell("gru", 2, 3)
    out = gru_step(cell, np.zeros(2), np.zeros(3))
    assert np.all(out.data == 0.0)


def test_lstm_zero_params_zero_state():
    cell = zero_cell("lstm", 2, 3)
    h, c = lstm_step(cell, np.zeros(2), np.zeros(3), np.zeros(3))
    assert np.all(h.data == 0.0) and np.all(c.data == 0.0)


def test_lstm_zero_params_decays_cell_state():
    # f = sigmoid(0) = 0.5 and i*g = 0, so c' = 0.5 * c; h' = 0.5 * tanh(c')
    cell = zero_cell("lstm", 1, 1)
    h, c = lstm_step(cell, np.zeros(1), np.zeros(1), np.array([1.0]))
    assert np.allclose(c.data, [0.5])
    assert np.allclose(h.data, [0.5 * np.tanh(0.5)])


def test_cell_step_batched_shapes():
    rng = np.random.default_rng(3)
    gru = init_cell("gru", 4, 5, rng)
    out = gru_step(gru, rng.standard_normal((6, 4)), rng.standard_normal((6, 5)))
    assert out.shape == (6, 5)
    lstm = init_cell("lstm", 4, 5, rng)
    h, c = lstm_step(lstm, rng.standard_normal((6, 4)),
                     rng.standard_normal((6, 5)), rng.standard_normal((6, 5)))
    assert h.shape == (6, 5) and c.shape == (6, 5)


def test_cell_dimension_mismatch_raises():
    cell = init_cell("gru", 3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        gru_step(cell, np.zeros(4), np.zeros(2))
    with pytest.raises(DimensionError):
        gru_step(cell, np.zeros(3), np.zeros(5))
    with pytest.raises(DimensionError):
        gru_step(cell, np.zeros((2, 3)), np.zeros((3, 2)))
    lcell = init_cell("lstm", 3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        lstm_step(lcell, np.zeros(3), np.zeros(2), np.zeros(4))
    with pytest.raises(DimensionError):
        gru_step(lcell, np.zeros(3), np.zeros(2))
    with pytest.raises(DimensionError):
        lstm_step(cell, np.zeros(3), np.zeros(2), np.zeros(2))


def test_init_cell_ranges():
    hidden = 16
    cell = init_cell("gru", 8, hidden, np.random.default_rng(1))
    cell.check()
    k = 1.0 / np.sqrt(hidden)
    for gate in cell.gates:
        assert np.all(np.abs(cell.weights[f"W{gate}"].data) <= k)
        assert np.all(np.abs(cell.weights[f"U{gate}"].data) <= k)
        assert np.all(cell.weights[f"b{gate}"].data == 0.0)


def test_init_cell_unknown_kind():
    with pytest.raises(ValueError):
        init_cell("rnn", 2, 2, np.random.default_rng(0))


@pytest.mark.parametrize("kind", ["gru", "lstm"])
def test_cell_step_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(11)
    cell = init_cell(kind, 3, 4, rng)
    x = rng.standard_normal(3)
    h = rng.standard_normal(4)
    c = rng.standard_normal(4)
    weight = rng.standard_normal(4)  # fixed projection making the loss scalar

    xs = ad.tensor(x.copy(), requires_grad=True)
    hs = ad.tensor(h.copy(), requires_grad=True)
    cs = ad.tensor(c.copy(), requires_grad=True)

    def loss_tensor():
        if kind == "gru":
            out = gru_step(cell, xs, hs)
        else:
            out, _ = lstm_step(cell, xs, hs, cs)
        return ad.sum_(out * weight)

    wrt = list(cell.weights.values()) + ([xs, hs] if kind == "gru" else [xs, hs, cs])
    grads = ad.grad(loss_tensor(), wrt)

    arrays = [t.data for t in wrt]

    def loss_np():
        # tensors share storage with `arrays`; rebuild the graph each call
        return loss_tensor().item()

    fd = fd_grad(loss_np, arrays, eps=1e-6)
    for g, f in zip(grads, fd):
        assert rel_err(g.data, f) <= 1e-6


# -- generator rollout ---------------------------------------------------------

@pytest.fixture
def small_gen():
    return init_generator(5, hidden_dim=4, embed_dim=3, noise_dim=2,
                          rng=np.random.default_rng(21))


def test_generate_rows_are_probability_vectors(small_gen):
    z = np.random.default_rng(0).standard_normal(2)
    seq = generate(small_gen, z, length=6)
    seq.check()
    assert seq.length == 6 and seq.width == 5


def test_generate_zero_output_projection_is_uniform(small_gen):
    small_gen.w_out.data[...] = 0.0
    small_gen.b_out.data[...] = 0.0
    seq = generate(small_gen, np.ones(2), length=3)
    assert np.allclose(seq.steps, 1.0 / 5)


def test_generate_reproducible(small_gen):
    z = np.random.default_rng(5).standard_normal(2)
    a = generate(small_gen, z, length=4)
    b = generate(small_gen, z, length=4)
    assert np.array_equal(a.steps, b.steps)


def test_rollout_length_zero_rejected(small_gen):
    with pytest.raises(ValueError):
        rollout(small_gen, np.zeros((1, 2)), 0)


def test_rollout_noise_width_checked(small_gen):
    with pytest.raises(DimensionError):
        rollout(small_gen, np.zeros((1, 3)), 2)


def test_rollout_prefix_needs_tokens(small_gen):
    with pytest.raises(ValueError, match="teacher_tokens"):
        rollout(small_gen, np.zeros((1, 2)), 3, prefix_len=2)
    with pytest.raises(ValueError, match="exceeds"):
        rollout(small_gen, np.zeros((1, 2)), 2,
                teacher_tokens=np.zeros((1, 3), dtype=np.int64), prefix_len=3)


def manual_gru_rollout(gen: Generator, z: np.ndarray, length: int,
                       teacher: list[int] | None = None) -> np.ndarray:
    """Independent numpy re-implementation of the single-layer GRU rollout."""
    def sig(v):
        return 1.0 / (1.0 + np.exp(-v))

    w = {k: t.data for k, t in gen.cells[0].weights.items()}
    h = np.tanh(z @ gen.w_noise.data.T + gen.b_noise.data)
    prev = np.zeros(gen.vocab_size)
    steps = []
    for t in range(length):
        x_v = prev
        if teacher is not None and t < len(teacher):
            x_v = np.zeros(gen.vocab_size)
            x_v[teacher[t]] = 1.0
        x = x_v @ gen.w_emb.data.T
        zg = sig(x @ w["Wz"].T + h @ w["Uz"].T + w["bz"])
        rg = sig(x @ w["Wr"].T + h @ w["Ur"].T + w["br"])
        cand = np.tanh(x @ w["Wh"].T + (rg * h) @ w["Uh"].T + w["bh"])
        h = (1.0 - zg) * h + zg * cand
        logits = h @ gen.w_out.data.T + gen.b_out.data
        e = np.exp(logits - logits.max())
        p = e / e.sum()
        steps.append(p)
        prev = p
    return np.stack(steps)


def test_rollout_matches_manual_reimplementation(small_gen):
    z = np.random.default_rng(8).standard_normal(2)
    got = generate(small_gen, z, length=5).steps
    want = manual_gru_rollout(small_gen, z, 5)
    assert rel_err(got, want) <= 1e-12


def test_full_teacher_prefix_feeds_one_hot_tokens(small_gen):
    z = np.random.default_rng(9).standard_normal(2)
    teacher = [3, 1, 4, 0]
    got = generate(small_gen, z, length=4, teacher_prefix=teacher).steps
    want = manual_gru_rollout(small_gen, z, 4, teacher=teacher)
    assert rel_err(got, want) <= 1e-12
    free = manual_gru_rollout(small_gen, z, 4)
    assert not np.allclose(got, free)


def test_teacher_mask_selects_samples(small_gen):
    rng = np.random.default_rng(10)
    z = rng.standard_normal((2, 2))
    teacher = np.array([[2, 0], [2, 0]])
    out = rollout(small_gen, z, 3, teacher_tokens=teacher,
                  teacher_mask=np.array([1.0, 0.0]), prefix_len=2).data
    forced = manual_gru_rollout(small_gen, z[0], 3, teacher=[2, 0])
    free = manual_gru_rollout(small_gen, z[1], 3)
    assert rel_err(out[0], forced) <= 1e-12
    assert rel_err(out[1], free) <= 1e-12


def test_lstm_generator_rollout_valid():
    gen = init_generator(4, hidden_dim=3, embed_dim=2, noise_dim=2,
                         cell_kind="lstm", rng=np.random.default_rng(2))
    seq = generate(gen, np.ones(2), length=5)
    seq.check()


def test_two_layer_generator_rollout_valid():
    gen = init_generator(4, hidden_dim=3, embed_dim=2, noise_dim=2,
                         layers=2, rng=np.random.default_rng(2))
    seq = generate(gen, np.ones(2), length=5)
    seq.check()
    assert len(gen.cells) == 2
    assert gen.cells[1].input_dim == 3


# -- critic -------------------------------------------------------------------

@pytest.fixture
def small_critic():
    return init_critic(5, hidden_dim=4, embed_dim=3, rng=np.random.default_rng(31))


def uniform_seq(length: int, width: int) -> SoftSequence:
    return SoftSequence(steps=np.full((length, width), 1.0 / width))


def test_zero_critic_scores_zero_in_wgan_mode(small_critic):
    zero_params(small_critic)
    assert critic_score(small_critic, uniform_seq(3, 5)) == 0.0


def test_zero_critic_scores_half_in_gan_mode():
    critic = init_critic(5, hidden_dim=4, embed_dim=3, sigmoid_output=True,
                         rng=np.random.default_rng(0))
    zero_params(critic)
    assert critic_score(critic, uniform_seq(3, 5)) == 0.5


def test_gan_critic_output_in_unit_interval():
    critic = init_critic(5, hidden_dim=4, embed_dim=3, sigmoid_output=True,
                         rng=np.random.default_rng(4))
    rng = np.random.default_rng(0)
    batch = rng.dirichlet(np.ones(5), size=(6, 3))
    scores = score_batch(critic, batch).data
    assert np.all((scores > 0.0) & (scores < 1.0))


def test_score_batch_shape_checks(small_critic):
    with pytest.raises(DimensionError):
        score_batch(small_critic, np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        score_batch(small_critic, np.zeros((2, 3, 4)))


def test_score_batch_matches_critic_score(small_critic):
    rng = np.random.default_rng(6)
    seq = SoftSequence(steps=rng.dirichlet(np.ones(5), size=3))
    batch_score = score_batch(small_critic, seq.steps[None]).data[0]
    assert np.isclose(batch_score, critic_score(small_critic, seq))


def test_critic_gradient_wrt_input_matches_finite_differences(small_critic):
    rng = np.random.default_rng(7)
    x = rng.dirichlet(np.ones(5), size=(2, 3))
    xt = ad.tensor(x.copy(), requires_grad=True)

    (grad_x,) = ad.grad(ad.sum_(score_batch(small_critic, xt)), [xt])

    def loss_np():
        return ad.sum_(score_batch(small_critic, ad.Tensor(xt.data))).item()

    (fd,) = fd_grad(loss_np, [xt.data], eps=1e-6)
    assert rel_err(grad_x.data, fd) <= 1e-6


def test_critic_gradient_wrt_params_matches_finite_differences():
    rng = np.random.default_rng(13)
    critic = init_critic(4, hidden_dim=3, embed_dim=2, cell_kind="lstm", rng=rng)
    x = rng.dirichlet(np.ones(4), size=(2, 3))
    params = list(critic.parameters().values())

    def loss_tensor():
        return ad.sum_(score_batch(critic, ad.Tensor(x)))

    grads = ad.grad(loss_tensor(), params)
    fd = fd_grad(lambda: loss_tensor().item(), [p.data for p in params], eps=1e-6)
    for g, f in zip(grads, fd):
        assert rel_err(g.data, f) <= 1e-5


# -- discretization ----------------------------------------------------------

def test_sample_hard_argmax():
    seq = SoftSequence(steps=np.array([[0.1, 0.9], [0.7, 0.3]]))
    assert sample_hard(seq) == [1, 0]


def test_sample_hard_tie_breaks_low():
    seq = SoftSequence(steps=np.array([[0.5, 0.5]]))
    assert sample_hard(seq) == [0]


def test_sample_hard_truncates_at_eos():
    steps = np.zeros((4, 3))
    steps[0, 1] = 1.0
    steps[1, 2] = 1.0  # eos
    steps[2, 0] = 1.0
    steps[3, 0] = 1.0
    assert sample_hard(SoftSequence(steps=steps), eos_id=2) == [1]


def test_sample_hard_multinomial_reproducible():
    rng = np.random.default_rng(0)
    steps = rng.dirichlet(np.ones(4), size=6)
    seq = SoftSequence(steps=steps)
    a = sample_hard(seq, mode="multinomial", rng=np.random.default_rng(9))
    b = sample_hard(seq, mode="multinomial", rng=np.random.default_rng(9))
    assert a == b


def test_sample_hard_multinomial_needs_rng():
    with pytest.raises(ValueError):
        sample_hard(uniform_seq(2, 3), mode="multinomial")
    with pytest.raises(ValueError):
        sample_hard(uniform_seq(2, 3), mode="beam")


def test_soft_sequence_check_rejects_bad_rows():
    with pytest.raises(ValueError):
        SoftSequence(steps=np.array([[0.6, 0.6]])).check()
    with pytest.raises(ValueError):
        SoftSequence(steps=np.array([[-0.2, 1.2]])).check()
