import math

import numpy as np
import pytest

from goldcast.lstm import LstmCell, LstmStack, lstm_backward, lstm_cell_step, lstm_forward, sigmoid
from goldcast.nn import DenseLayer, Mlp, mse, mse_grad
from gradcheck import max_rel_error, numeric_grads


def zero_stack(n_features=2, sizes=(2, 2, 2), window=None):
    sizes = [n_features, *sizes]
    cells = [LstmCell(np.zeros((4 * h, n)), np.zeros((4 * h, h)), np.zeros(4 * h)) for n, h in zip(sizes, sizes[1:])]
    return LstmStack(cells, Mlp([DenseLayer(np.zeros((1, sizes[-1])), np.zeros(1), "identity")]), window)


def test_zero_weights_cell_step():
    cell = LstmCell(np.zeros((8, 3)), np.zeros((8, 2)), np.zeros(8))
    c_prev = np.array([0.8, -2.0])
    h, c, cache = lstm_cell_step(cell, np.array([1.0, -1.0, 3.0]), np.array([0.3, 0.1]), c_prev)
    assert np.all(cache["i"] == 0.5) and np.all(cache["f"] == 0.5) and np.all(cache["o"] == 0.5)
    assert np.all(cache["g"] == 0.0)
    np.testing.assert_allclose(c, 0.5 * c_prev, rtol=1e-15)
    np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), rtol=1e-15)


def test_zero_input_and_state_gives_zero_hidden(rng):
    cell = LstmCell.create(3, 4, rng)
    cell.gate_biases[:] = 0
    h, c, _ = lstm_cell_step(cell, np.zeros(3), np.zeros(4), np.zeros(4))
    assert np.all(h == 0) and np.all(c == 0)
    with pytest.raises(ValueError, match="dimension"):
        lstm_cell_step(cell, np.zeros(2), np.zeros(4), np.zeros(4))


def test_gate_layout_and_forget_bias(rng):
    cell = LstmCell.create(3, 5, rng)
    assert cell.input_weights.shape == (20, 3) and cell.recurrent_weights.shape == (20, 5)
    np.testing.assert_array_equal(cell.gate_biases[5:10], 1.0)
    assert np.count_nonzero(cell.gate_biases) == 5


def test_all_zero_stack_predicts_zero(rng):
    stack = zero_stack(3, window=4)
    assert lstm_forward(stack, rng.normal(size=(4, 3)))[0] == 0.0
    with pytest.raises(ValueError, match="window length"):
        stack.forward(rng.normal(size=(5, 3)))


def _scalar_lstm_trace(stack, seq):
    """Independent per-unit loop over the gate equations (pure python floats)."""
    inputs = [list(map(float, row)) for row in seq]
    for cell in stack.layers:
        H = cell.hidden_size
        W, U, b = cell.input_weights.tolist(), cell.recurrent_weights.tolist(), cell.gate_biases.tolist()
        h, c = [0.0] * H, [0.0] * H
        outs = []
        for x in inputs:
            z = [b[r] + sum(W[r][j] * x[j] for j in range(len(x))) + sum(U[r][j] * h[j] for j in range(H))
                 for r in range(4 * H)]
            sg = lambda v: 1.0 / (1.0 + math.exp(-v))
            i = [sg(z[u]) for u in range(H)]
            f = [sg(z[H + u]) for u in range(H)]
            o = [sg(z[2 * H + u]) for u in range(H)]
            g = [math.tanh(z[3 * H + u]) for u in range(H)]
            c = [f[u] * c[u] + i[u] * g[u] for u in range(H)]
            h = [o[u] * math.tanh(c[u]) for u in range(H)]
            outs.append(h)
        inputs = outs
    head = stack.head.layers[0]
    return float(head.biases[0] + sum(head.weights[0, j] * inputs[-1][j] for j in range(len(inputs[-1]))))


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_hand_trace(seed):
    rng = np.random.default_rng(seed)
    stack = LstmStack.create(3, (2, 2, 2), rng, window_len=2)
    seq = rng.normal(size=(2, 3))
    got, _ = lstm_forward(stack, seq)
    assert got == pytest.approx(_scalar_lstm_trace(stack, seq), abs=1e-12)


def test_sigmoid_is_the_logistic(rng):
    x = rng.normal(scale=5, size=50)
    np.testing.assert_allclose(sigmoid(x), 1 / (1 + np.exp(-x)), rtol=1e-12, atol=1e-16)


@pytest.mark.parametrize("seed", range(10))
def test_bptt_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    stack = LstmStack.create(3, (2, 2, 2), rng, window_len=3)
    X, Y = rng.normal(size=(4, 3, 3)), rng.normal(size=(4, 1))

    def loss():
        return mse(stack.predict(X), Y)

    pred, cache = stack.forward(X)
    analytic = stack.backward(cache, mse_grad(pred, Y))
    assert max_rel_error(analytic, numeric_grads(stack, loss)) < 1e-4


def test_bptt_with_dropout_mask_matches_finite_differences():
    rng = np.random.default_rng(7)
    stack = LstmStack.create(2, (3, 2, 2), rng, head_hidden=[3], window_len=4)
    X, Y = rng.normal(size=(3, 4, 2)), rng.normal(size=(3, 1))
    pred, cache = stack.forward(X, "train", 0.3, np.random.default_rng(1))

    def loss():
        return mse(stack.forward(X, "train", 0.3, np.random.default_rng(1))[0], Y)

    analytic = stack.backward(cache, mse_grad(pred, Y))
    assert max_rel_error(analytic, numeric_grads(stack, loss)) < 1e-4


def test_zero_upstream_gradient_and_head_bias(rng):
    stack = LstmStack.create(2, (2, 3, 2), rng)
    seq = rng.normal(size=(5, 2))
    _, cache = lstm_forward(stack, seq)
    grads = lstm_backward(stack, cache, 0.0)
    assert all(np.all(g == 0) for g in grads.values())
    grads = lstm_backward(stack, cache, 0.37)
    assert grads["head.dense0.biases"][0] == pytest.approx(0.37, abs=1e-15)
    with pytest.raises(ValueError, match="cache"):
        stack.backward(None, np.ones(1))


def test_memory_property_with_large_forget_bias():
    cell = LstmCell(np.zeros((4, 1)), np.zeros((4, 1)), np.array([0.0, 15.0, 0.0, 0.0]))
    h, c = np.zeros(1), np.ones(1)
    for _ in range(50):
        h, c, _ = lstm_cell_step(cell, np.array([0.7]), h, c)
    assert abs(c[0] - 1.0) < 1e-3


def test_infer_output_ignores_dropout_rate(rng):
    stack = LstmStack.create(2, (3, 3, 3), rng)
    X = rng.normal(size=(4, 6, 2))
    a = stack.forward(X, "infer", 0.0)[0]
    b = stack.forward(X, "infer", 0.9, np.random.default_rng(0))[0]
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(stack.predict(X[:1]), stack.predict(X[:1]))


def test_train_mode_without_rng_rejected(rng):
    stack = LstmStack.create(2, (2, 2), rng)
    with pytest.raises(ValueError, match="rng"):
        stack.forward(rng.normal(size=(3, 2)), "train", 0.5)


def test_stack_shape_checks(rng):
    a, b = LstmCell.create(2, 3, rng), LstmCell.create(4, 2, rng)
    with pytest.raises(ValueError):
        LstmStack([a, b], Mlp.create(2, [], 1, rng))
