from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentheads import nn
from latentheads.errors import ConfigurationError, InvalidInputError, NonFiniteError, UsageError

from conftest import fd_gradient, max_relative_error


def tensor(values):
    return nn.Tensor(np.asarray(values, dtype=np.float64))


# ---------------------------------------------------------------- dense layer

def test_dense_zero_weights_tanh_gives_zero():
    layer = nn.DenseLayer(2, 3, "tanh", np.random.default_rng(0))
    layer.weights.data[...] = 0.0
    layer.bias.data[...] = 0.0
    out = layer(tensor([1.5, -2.0]))
    assert np.array_equal(out.data, np.zeros(3))


def test_dense_identity_passthrough():
    layer = nn.DenseLayer(2, 2, "identity", np.random.default_rng(0))
    layer.weights.data[...] = np.eye(2)
    layer.bias.data[...] = 0.0
    out = layer(tensor([0.3, -0.7]))
    assert np.allclose(out.data, [0.3, -0.7])


def test_dense_single_row_tanh():
    layer = nn.DenseLayer(2, 1, "tanh", np.random.default_rng(0))
    layer.weights.data[...] = np.array([[1.0, 1.0]])
    layer.bias.data[...] = 0.0
    out = layer(tensor([0.5, 0.5]))
    assert np.allclose(out.data, [math.tanh(1.0)])


def test_dense_rejects_bad_activation_and_size():
    with pytest.raises(ConfigurationError):
        nn.DenseLayer(2, 2, "relu")
    with pytest.raises(ConfigurationError):
        nn.DenseLayer(0, 2)
    layer = nn.DenseLayer(3, 2, rng=np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        layer(tensor([1.0, 2.0]))


# ------------------------------------------------------------------ lstm cell

def _zeroed_cell(input_size=2, hidden=3):
    cell = nn.LstmCell(input_size, hidden, np.random.default_rng(1))
    for _, p in cell.named_parameters():
        p.data[...] = 0.0
    return cell


def test_lstm_all_zero_weights_gives_zero_state():
    cell = _zeroed_cell()
    h0, c0 = cell.initial_state()
    h, c = cell.step(tensor([0.4, -1.2]), h0, c0)
    assert np.array_equal(h.data, np.zeros(3))
    assert np.array_equal(c.data, np.zeros(3))


def test_lstm_saturated_gates_carry_cell_state():
    # forget gate wide open, input gate shut: c must pass through unchanged
    cell = _zeroed_cell()
    cell.b_forget.data[...] = 50.0
    cell.b_input.data[...] = -50.0
    h0, _ = cell.initial_state()
    c_prev = tensor([0.3, -0.8, 1.1])
    _, c = cell.step(tensor([2.0, -0.5]), h0, c_prev)
    assert np.allclose(c.data, c_prev.data, atol=1e-12)


def test_lstm_matches_scalar_reimplementation():
    rng = np.random.default_rng(42)
    cell = nn.LstmCell(2, 3, rng)
    x = rng.normal(size=2)
    h_prev = rng.normal(size=3)
    c_prev = rng.normal(size=3)
    h, c = cell.step(tensor(x), tensor(h_prev), tensor(c_prev))

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    xh = list(x) + list(h_prev)
    for j in range(3):
        def affine(w, b):
            return sum(w.data[j][k] * xh[k] for k in range(5)) + b.data[j]
        i_j = sig(affine(cell.w_input, cell.b_input))
        f_j = sig(affine(cell.w_forget, cell.b_forget))
        o_j = sig(affine(cell.w_output, cell.b_output))
        g_j = math.tanh(affine(cell.w_candidate, cell.b_candidate))
        c_j = f_j * c_prev[j] + i_j * g_j
        h_j = o_j * math.tanh(c_j)
        assert abs(c.data[j] - c_j) < 1e-12
        assert abs(h.data[j] - h_j) < 1e-12


def test_lstm_forget_bias_initialized_to_one():
    cell = nn.LstmCell(4, 4, np.random.default_rng(0))
    assert np.all(cell.b_forget.data == 1.0)
    assert np.all(cell.b_input.data == 0.0)


# ----------------------------------------------------------------- bi-encoder

def test_biencoder_single_token_is_two_single_steps():
    enc = nn.BiEncoder(2, 3, np.random.default_rng(5))
    x = tensor([0.7, -0.2])
    out = enc.encode([x])
    h0, c0 = enc.forward_cell.initial_state()
    hf, _ = enc.forward_cell.step(x, h0, c0)
    hr, _ = enc.reverse_cell.step(x, *enc.reverse_cell.initial_state())
    assert np.allclose(out[0].data, np.concatenate([hf.data, hr.data]))


def test_biencoder_palindrome_with_shared_cell():
    rng = np.random.default_rng(9)
    cell = nn.LstmCell(2, 3, rng)
    enc = nn.BiEncoder.from_cells(cell, cell)
    xs = [tensor([0.1, 0.4]), tensor([-0.9, 0.2]), tensor([0.1, 0.4])]
    out = enc.encode(xs)
    h = enc.hidden_size
    # with one shared cell on a palindrome, position k reversed equals
    # position n-1-k with forward/reverse halves swapped
    for k in range(len(xs)):
        mirrored = out[len(xs) - 1 - k].data
        swapped = np.concatenate([mirrored[h:], mirrored[:h]])
        assert np.allclose(out[k].data, swapped, atol=1e-12)


def test_biencoder_shapes():
    enc = nn.BiEncoder(3, 4, np.random.default_rng(0))
    outs = enc.encode([tensor(np.ones(3))] * 5)
    assert len(outs) == 5
    assert all(o.data.shape == (8,) for o in outs)
    assert enc.output_size == 8


def test_biencoder_rejects_empty_sequence():
    enc = nn.BiEncoder(2, 2, np.random.default_rng(0))
    with pytest.raises(InvalidInputError):
        enc.encode([])


def test_biencoder_finals_are_sequence_ends():
    enc = nn.BiEncoder(2, 3, np.random.default_rng(3))
    xs = [tensor([0.2, 0.1]), tensor([1.0, -1.0]), tensor([0.5, 0.5])]
    outs, final_fwd, final_rev = enc.encode_with_finals(xs)
    assert np.array_equal(final_fwd.data, outs[-1].data[:3])
    assert np.array_equal(final_rev.data, outs[0].data[3:])


# ------------------------------------------------------------------- backward

def test_backward_zero_loss_zero_gradients():
    w = nn.Parameter(np.array([0.3, -0.4]))
    loss = nn.mse_loss(nn.tanh(w), np.tanh(w.data))
    assert float(loss.data) == 0.0
    if loss.needs_grad:
        loss.backward()
    assert np.array_equal(w.grad, np.zeros(2))


def test_backward_tanh_chain_at_zero():
    # d tanh(w*x)/dw at w=0, x=1 is sech^2(0) = 1
    w = nn.Parameter(np.array([0.0]))
    x = tensor([1.0])
    loss = nn.tanh(nn.mul(w, x))
    loss.backward()
    assert np.allclose(w.grad, [1.0])


def test_backward_requires_scalar():
    w = nn.Parameter(np.array([1.0, 2.0]))
    y = nn.tanh(w)
    with pytest.raises(UsageError):
        y.backward()


def test_backward_twice_is_an_error():
    w = nn.Parameter(np.array([1.0]))
    loss = nn.mse_loss(nn.tanh(w), np.zeros(1))
    loss.backward()
    with pytest.raises(UsageError):
        loss.backward()


def test_no_grad_builds_no_tape():
    w = nn.Parameter(np.array([1.0, -1.0]))
    with nn.no_grad():
        out = nn.tanh(w)
    assert not out.needs_grad


def test_gradient_accumulates_across_uses():
    w = nn.Parameter(np.array([0.5]))
    y = nn.add(nn.mul(w, tensor([2.0])), nn.mul(w, tensor([3.0])))
    loss = nn.mse_loss(y, np.zeros(1))
    loss.backward()
    # d/dw (5w)^2 = 50w = 25
    assert np.allclose(w.grad, [2 * 5 * 0.5 * 5])


def test_dense_chain_matches_finite_differences():
    rng = np.random.default_rng(11)
    layer = nn.DenseLayer(3, 2, "tanh", rng)
    x = rng.normal(size=3)
    target = rng.normal(size=2)

    def loss_fn():
        return float(nn.mse_loss(layer(tensor(x)), target).data)

    loss = nn.mse_loss(layer(tensor(x)), target)
    loss.backward()
    for p in (layer.weights, layer.bias):
        fd = fd_gradient(loss_fn, p)
        assert max_relative_error(p.grad, fd) < 1e-6


# ----------------------------------------------------------------------- adam

def test_adam_zero_gradient_leaves_values():
    p = nn.Parameter(np.array([1.0, -2.0]))
    before = p.data.copy()
    nn.adam_step([p])
    assert np.array_equal(p.data, before)


def test_adam_first_step_size_is_learning_rate():
    p = nn.Parameter(np.array([5.0]))
    p.grad[...] = 1.0
    nn.adam_step([p], lr=0.001)
    assert abs((5.0 - p.data[0]) - 0.001) < 1e-6
    assert p.step_count == 1
    assert np.array_equal(p.grad, np.zeros(1))


def test_adam_descends_on_quadratic():
    p = nn.Parameter(np.array([1.0]))
    values = [1.0]
    for _ in range(10):
        p.grad[...] = 2.0 * p.data
        nn.adam_step([p], lr=0.05)
        values.append(float(p.data[0]))
    assert all(b < a for a, b in zip(values, values[1:]))
    assert 0.0 < values[-1] < 1.0


def test_adam_rejects_non_finite_gradient_without_mutating():
    p = nn.Parameter(np.array([1.0, 2.0]))
    q = nn.Parameter(np.array([3.0]))
    p.grad[...] = [1.0, np.nan]
    q.grad[...] = 1.0
    with pytest.raises(NonFiniteError):
        nn.adam_step([("p", p), ("q", q)])
    assert np.array_equal(p.data, [1.0, 2.0])
    assert np.array_equal(q.data, [3.0])
    assert q.step_count == 0


# --------------------------------------------------------------------- losses

def test_mse_identical_is_zero():
    assert float(nn.mse_loss(tensor([1.0, 2.0]), np.array([1.0, 2.0])).data) == 0.0


def test_mse_direct_values():
    assert float(nn.mse_loss(tensor([1.0, 0.0]), np.zeros(2)).data) == 0.5
    got = float(nn.mse_loss(tensor([1.0, 2.0, 3.0]), np.ones(3)).data)
    assert abs(got - 5.0 / 3.0) < 1e-15


def test_mae_direct_value_and_gradient_sign():
    pred = nn.Parameter(np.array([1.0, -2.0, 0.5]))
    loss = nn.mae_loss(pred, np.array([0.0, 0.0, 0.5]))
    assert abs(float(loss.data) - 1.0) < 1e-15
    loss.backward()
    assert np.allclose(pred.grad, [1 / 3, -1 / 3, 0.0])


def test_margin_satisfied_is_zero():
    assert float(nn.margin_loss(tensor([5.0, 0.0, 0.0]), 0).data) == 0.0


def test_margin_tie_is_one():
    assert float(nn.margin_loss(tensor([0.0, 0.0]), 0).data) == 1.0


def test_margin_direct_value():
    got = float(nn.margin_loss(tensor([0.2, 0.9, 0.1]), 0).data)
    assert abs(got - 1.7) < 1e-15


def test_margin_single_class_is_zero():
    assert float(nn.margin_loss(tensor([3.0]), 0).data) == 0.0


def test_margin_gradient_moves_gold_up_competitor_down():
    s = nn.Parameter(np.array([0.2, 0.9, 0.1]))
    nn.margin_loss(s, 0).backward()
    assert np.allclose(s.grad, [-1.0, 1.0, 0.0])


def test_nll_matches_log():
    probs = nn.softmax(nn.Parameter(np.array([1.0, 2.0, 0.5])))
    loss = nn.nll_loss(probs, 1)
    assert abs(float(loss.data) + math.log(probs.data[1])) < 1e-12


def test_nll_gradient_matches_finite_differences():
    w = nn.Parameter(np.array([1.0, -0.5, 0.2]))

    def loss_fn():
        return float(nn.nll_loss(nn.softmax(nn.tanh(w)), 2).data)

    nn.nll_loss(nn.softmax(nn.tanh(w)), 2).backward()
    fd = fd_gradient(loss_fn, w)
    assert max_relative_error(w.grad, fd) < 1e-6


# --------------------------------------------------------------------- cosine

def test_cosine_identical_unit_vectors():
    assert nn.cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == 1.0


def test_cosine_orthogonal():
    assert nn.cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_collinear():
    assert nn.cosine_similarity(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == 1.0


def test_cosine_zero_vector_scores_zero():
    assert nn.cosine_similarity(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0.0


# ----------------------------------------------------------------- properties

finite_vec = st.lists(st.floats(min_value=-100, max_value=100,
                                allow_nan=False, allow_infinity=False),
                      min_size=1, max_size=50)


@given(finite_vec, st.randoms())
@settings(max_examples=60, deadline=None)
def test_cosine_always_in_unit_interval(values, pyrandom):
    a = np.array(values)
    b = np.array([pyrandom.uniform(-100, 100) for _ in values])
    c = nn.cosine_similarity(a, b)
    assert -1.0 <= c <= 1.0
    if np.linalg.norm(a) > 1e-9:
        assert nn.cosine_similarity(a, a) == 1.0


@given(st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False),
                min_size=1, max_size=12),
       st.integers(min_value=0, max_value=11))
@settings(max_examples=60, deadline=None)
def test_margin_is_non_negative(scores, gold):
    gold = gold % len(scores)
    assert float(nn.margin_loss(tensor(scores), gold).data) >= 0.0


@given(finite_vec)
@settings(max_examples=60, deadline=None)
def test_softmax_is_a_distribution(values):
    out = nn.softmax(tensor(values))
    assert np.all(out.data > 0)
    assert abs(out.data.sum() - 1.0) < 1e-9


@given(st.integers(min_value=1, max_value=50))
@settings(max_examples=25, deadline=None)
def test_elementwise_ops_preserve_shape(n):
    x = tensor(np.linspace(-2, 2, n))
    assert nn.tanh(x).data.shape == (n,)
    assert nn.sigmoid(x).data.shape == (n,)
    assert nn.softmax(x).data.shape == (n,)
