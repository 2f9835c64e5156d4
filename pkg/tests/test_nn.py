import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from goldcast.errors import NumericError
from goldcast.nn import (
    AdamState,
    DenseLayer,
    Mlp,
    TrainConfig,
    adam_step,
    backward,
    dense_backward,
    dense_forward,
    dropout_mask,
    early_stopping_epochs,
    leaky_relu,
    leaky_relu_grad,
    mae,
    mse,
    mse_grad,
    rmse,
    sgd_step,
    SgdState,
    train_with_early_stopping,
)
from gradcheck import max_rel_error, numeric_grads


def test_leaky_relu_examples():
    assert leaky_relu(3.0, 0.01) == 3.0
    assert leaky_relu(0.0, 0.01) == 0.0
    assert leaky_relu(-2.0, 0.01) == pytest.approx(-0.02, abs=1e-15)
    np.testing.assert_array_equal(leaky_relu_grad(np.array([-1.0, 0.0, 2.0])), [0.01, 1.0, 1.0])


def test_metric_examples():
    assert mse([1, 3], [2, 2]) == 1.0 and mae([1, 3], [2, 2]) == 1.0
    assert mse([4, 5], [4, 5]) == 0 and mae([4, 5], [4, 5]) == 0
    with pytest.raises(ValueError):
        mse([1, 2], [1])
    with pytest.raises(ValueError):
        mae([], [])


@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3)))
def test_rmse_dominates_mae(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    assert rmse(a, b) >= mae(a, b) - 1e-9 * (1 + mae(a, b))
    assert rmse(a, b) ** 2 == pytest.approx(mse(a, b), rel=1e-12, abs=1e-12)


def test_dense_forward_trivial_cases(rng):
    x = rng.normal(size=4)
    zero = DenseLayer(np.zeros((3, 4)), np.zeros(3))
    np.testing.assert_array_equal(dense_forward(zero, x)[0], np.zeros(3))
    ident = DenseLayer(np.eye(4), np.zeros(4), "identity")
    np.testing.assert_array_equal(dense_forward(ident, x)[0], x)
    layer = DenseLayer.create(4, 3, rng)
    a = dense_forward(layer, x, "train", 0.0, np.random.default_rng(0))[0]
    np.testing.assert_array_equal(a, dense_forward(layer, x, "infer")[0])
    with pytest.raises(ValueError, match="features"):
        dense_forward(layer, np.ones(5))


def test_inverted_dropout_scaling(rng):
    m = dropout_mask((200_000,), 0.25, rng)
    assert set(np.unique(m)) == {0.0, 1 / 0.75}
    assert m.mean() == pytest.approx(1.0, abs=0.01)


def test_linear_layer_gradient_closed_form(rng):
    W, b, x, y = rng.normal(size=(2, 3)), rng.normal(size=2), rng.normal(size=3), rng.normal(size=2)
    layer = DenseLayer(W, b, "identity")
    out, cache = dense_forward(layer, x)
    _, g = dense_backward(layer, cache, mse_grad(out, y))
    expected = 2 * np.outer(W @ x + b - y, x) / len(y)
    np.testing.assert_allclose(g["weights"], expected, rtol=1e-12)
    np.testing.assert_allclose(g["biases"], 2 * (W @ x + b - y) / len(y), rtol=1e-12)


def test_zero_loss_gradient_gives_zero_grads(rng):
    net = Mlp.create(3, [4], 2, rng)
    X = rng.normal(size=(5, 3))
    out, caches = net.forward(X)
    grads = backward(net, caches, np.zeros_like(out))
    assert all(np.all(g == 0) for g in grads.values())
    assert set(grads) == set(net.params())
    with pytest.raises(ValueError):
        net.backward(None, np.zeros_like(out))


@pytest.mark.parametrize("seed", range(10))
def test_mlp_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = Mlp.create(3, [4, 3], 2, rng)
    X, Y = rng.normal(size=(6, 3)), rng.normal(size=(6, 2))

    def loss():
        return mse(net.predict(X), Y)

    out, caches = net.forward(X)
    analytic = net.backward(caches, mse_grad(out, Y))
    assert max_rel_error(analytic, numeric_grads(net, loss)) < 1e-4


def test_adam_zero_gradient_and_zero_lr(rng):
    p = {"w": rng.normal(size=3)}
    before = p["w"].copy()
    st_ = AdamState()
    adam_step(p, {"w": np.zeros(3)}, st_)
    np.testing.assert_array_equal(p["w"], before)
    assert st_.step_count == 1
    adam_step(p, {"w": np.ones(3)}, AdamState(learning_rate=0.0))
    np.testing.assert_array_equal(p["w"], before)


def test_adam_constant_gradient_step_tends_to_lr():
    p = {"w": np.zeros(2)}
    state = AdamState(learning_rate=1e-3)
    g = {"w": np.array([0.3, -7.0])}
    for _ in range(999):
        adam_step(p, g, state)
    prev = p["w"].copy()
    adam_step(p, g, state)
    step = p["w"] - prev
    np.testing.assert_allclose(np.abs(step), 1e-3, rtol=0.05)
    np.testing.assert_array_equal(np.sign(step), -np.sign(g["w"]))


def test_adam_rejects_non_finite_gradients():
    with pytest.raises(NumericError):
        adam_step({"w": np.zeros(2)}, {"w": np.array([np.nan, 0.0])}, AdamState())


def test_sgd_fixed_step():
    p = {"w": np.array([1.0])}
    sgd_step(p, {"w": np.array([2.0])}, SgdState(0.1))
    assert p["w"][0] == pytest.approx(0.8)


def test_early_stopping_trace():
    assert early_stopping_epochs([5, 4, 3, 3.1, 3.2, 3.05, 3.3, 3.4], 5) == (8, 3)
    assert early_stopping_epochs([3, 2, 1], 10) == (3, 3)


class _ScriptedModel:
    """One parameter that counts optimizer steps; validation loss follows a script."""

    def __init__(self, val_losses):
        self.w = np.zeros(1)
        self.losses = val_losses

    def params(self):
        return {"w": self.w}

    def forward(self, X, mode="infer", dropout_rate=0.0, rng=None):
        if mode == "train":
            return np.zeros((len(X), 1)), None
        k = int(round(self.w[0]))
        return np.full((len(X), 1), math.sqrt(self.losses[k - 1] if k else 99.0)), None

    def backward(self, cache, grad):
        return {"w": np.array([-1.0])}  # sgd with lr 1 adds one per step


def test_train_with_early_stopping_restores_best_epoch():
    losses = [5, 4, 3, 3.1, 3.2, 3.05, 3.3, 3.4, 1.0, 1.0]
    model = _ScriptedModel(losses)
    X, Y = np.zeros((4, 1)), np.zeros((4, 1))
    cfg = TrainConfig(max_epochs=10, patience=5, batch_size=4, optimizer="sgd", learning_rate=1.0, dropout_rate=0)
    _, hist = train_with_early_stopping(model, (X, Y), (X, Y), cfg)
    assert hist.epochs_run == 8 and hist.best_epoch == 3 and hist.stopped_early
    np.testing.assert_allclose(hist.val_loss, losses[:8])
    assert model.w[0] == 3.0


def test_training_is_seeded_and_improves(rng):
    X = rng.normal(size=(64, 3))
    Y = X @ np.array([[1.0], [-2.0], [0.5]])
    cfg = TrainConfig(max_epochs=30, patience=30, learning_rate=1e-2, seed=3)
    a, ha = train_with_early_stopping(Mlp.create(3, [8], 1, np.random.default_rng(1)), (X, Y), (X, Y), cfg)
    b, hb = train_with_early_stopping(Mlp.create(3, [8], 1, np.random.default_rng(1)), (X, Y), (X, Y), cfg)
    assert ha.val_loss == hb.val_loss
    for k in a.params():
        np.testing.assert_array_equal(a.params()[k], b.params()[k])
    assert min(ha.val_loss) == ha.val_loss[ha.best_epoch - 1] < ha.val_loss[0]
    assert not hb.stopped_early and hb.epochs_run == 30


def test_zero_epochs_leaves_model_unchanged(rng):
    net = Mlp.create(2, [3], 1, rng)
    before = {k: v.copy() for k, v in net.params().items()}
    X = rng.normal(size=(5, 2))
    train_with_early_stopping(net, (X, X[:, :1]), (X, X[:, :1]), TrainConfig(max_epochs=0))
    for k, v in net.params().items():
        np.testing.assert_array_equal(v, before[k])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises():
    net = Mlp([DenseLayer(np.full((1, 1), 1e200), np.zeros(1), "identity")])
    X = np.ones((2, 1)) * 1e200
    with pytest.raises(NumericError):
        train_with_early_stopping(net, (X, X), (X, X), TrainConfig(max_epochs=2))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(dropout_rate=1.0)
    with pytest.raises(ValueError):
        TrainConfig(patience=0)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")


def test_inference_is_bit_deterministic(rng):
    net = Mlp.create(4, [5, 5], 3, rng)
    X = rng.normal(size=(7, 4))
    np.testing.assert_array_equal(net.predict(X), net.predict(X))
