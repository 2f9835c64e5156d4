"""Dense network building blocks trained with hand-written gradients.

Everything runs in float64. A trainable model exposes::

    params() -> dict[str, ndarray]            # live arrays, updated in place
    forward(X, mode, dropout_rate, rng) -> (pred, cache)
    backward(cache, grad_pred) -> dict[str, ndarray]

``pred`` is ``(batch, n_outputs)``.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("leaky_relu", "identity")
MODES = ("train", "infer")


def leaky_relu(x, alpha: float = 0.01):
    if np.isscalar(x):
        return x if x >= 0 else alpha * x
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, x, alpha * x)


def leaky_relu_grad(x, alpha: float = 0.01):
    # subgradient at exactly 0 is taken as 1
    return np.where(np.asarray(x) >= 0, 1.0, alpha)


def _check_pair(pred, target):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} targets")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def mse(pred, target) -> float:
    p, t = _check_pair(pred, target)
    return float(np.mean((p - t) ** 2))


def mae(pred, target) -> float:
    p, t = _check_pair(pred, target)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, target) -> float:
    return math.sqrt(mse(pred, target))


def glorot_uniform(rng: np.random.Generator, n_out: int, n_in: int, fan_in=None, fan_out=None) -> np.ndarray:
    fan_in = n_in if fan_in is None else fan_in
    fan_out = n_out if fan_out is None else fan_out
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def dropout_mask(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: kept units carry ``1 / (1 - rate)``."""
    if rate <= 0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "leaky_relu"
    alpha: float = 0.01

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (out, in) with matching biases")

    @classmethod
    def create(cls, n_in: int, n_out: int, rng: np.random.Generator,
               activation: str = "leaky_relu", alpha: float = 0.01) -> "DenseLayer":
        return cls(glorot_uniform(rng, n_out, n_in), np.zeros(n_out), activation, alpha)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseCache:
    x: np.ndarray
    pre: np.ndarray
    mask: np.ndarray | None
    squeeze: bool


def dense_forward(layer: DenseLayer, x, mode: str = "infer", dropout_rate: float = 0.0,
                  rng: np.random.Generator | None = None):
    """``activation(W x + b)`` with inverted dropout on the output in train mode.

    Accepts a single vector or a ``(batch, in)`` matrix.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xb = x[None, :] if squeeze else x
    if xb.shape[1] != layer.n_in:
        raise ValueError(f"input has {xb.shape[1]} features, layer expects {layer.n_in}")
    pre = xb @ layer.weights.T + layer.biases
    out = leaky_relu(pre, layer.alpha) if layer.activation == "leaky_relu" else pre
    mask = None
    if mode == "train" and dropout_rate > 0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        mask = dropout_mask(out.shape, dropout_rate, rng)
        out = out * mask
    cache = DenseCache(xb, pre, mask, squeeze)
    return (out[0] if squeeze else out), cache


def dense_backward(layer: DenseLayer, cache: DenseCache | None, grad_out):
    """Return ``(grad_input, {"weights": dW, "biases": db})``."""
    if cache is None:
        raise ValueError("missing forward cache")
    g = np.asarray(grad_out, dtype=float)
    g = g[None, :] if cache.squeeze else g
    if g.shape != cache.pre.shape:
        raise ValueError("stale cache: gradient shape does not match cached forward pass")
    if cache.mask is not None:
        g = g * cache.mask
    if layer.activation == "leaky_relu":
        g = g * leaky_relu_grad(cache.pre, layer.alpha)
    grads = {"weights": g.T @ cache.x, "biases": g.sum(axis=0)}
    gx = g @ layer.weights
    return (gx[0] if cache.squeeze else gx), grads


class Mlp:
    """Stack of dense layers; hidden layers leaky ReLU, output identity."""

    def __init__(self, layers: list[DenseLayer]):
        self.layers = layers

    @classmethod
    def create(cls, n_in: int, hidden: list[int], n_out: int, rng: np.random.Generator,
               alpha: float = 0.01) -> "Mlp":
        sizes = [n_in, *hidden]
        layers = [DenseLayer.create(a, b, rng, "leaky_relu", alpha) for a, b in zip(sizes, sizes[1:])]
        layers.append(DenseLayer.create(sizes[-1], n_out, rng, "identity", alpha))
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"dense{i}.weights"] = layer.weights
            out[f"dense{i}.biases"] = layer.biases
        return out

    def forward(self, X, mode: str = "infer", dropout_rate: float = 0.0, rng=None):
        h = np.asarray(X, dtype=float)
        caches = []
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            rate = dropout_rate if i < last else 0.0
            h, c = dense_forward(layer, h, mode, rate, rng)
            caches.append(c)
        return h, caches

    def backward(self, caches, grad_pred, return_input_grad: bool = False):
        if not caches or len(caches) != len(self.layers):
            raise ValueError("missing or mismatched forward cache")
        grads = {}
        g = grad_pred
        for i in range(len(self.layers) - 1, -1, -1):
            g, lg = dense_backward(self.layers[i], caches[i], g)
            grads[f"dense{i}.weights"] = lg["weights"]
            grads[f"dense{i}.biases"] = lg["biases"]
        return (grads, g) if return_input_grad else grads

    def predict(self, X) -> np.ndarray:
        return self.forward(X, "infer")[0]


def backward(network, cache, loss_grad):
    """Parameter gradients of ``network`` given the upstream loss gradient."""
    return network.backward(cache, loss_grad)


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def _check_finite(grads):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name!r}; aborting training")


def adam_step(params: dict, grads: dict, state: AdamState):
    """In-place bias-corrected Adam update; returns ``(params, state)``."""
    _check_finite(grads)
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(p)
            state.second_moment[name] = np.zeros_like(p)
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class SgdState:
    """Plain gradient descent with a fixed learning rate."""

    learning_rate: float = 1e-2
    step_count: int = 0


def sgd_step(params: dict, grads: dict, state: SgdState):
    _check_finite(grads)
    state.step_count += 1
    for name, p in params.items():
        p -= state.learning_rate * grads[name]
    return params, state


@dataclass
class TrainConfig:
    max_epochs: int = 100
    patience: int = 5
    dropout_rate: float = 0.01
    batch_size: int = 32
    seed: int = 0
    learning_rate: float = 1e-3
    optimizer: str = "adam"  # or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1 or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def make_optimizer(self):
        if self.optimizer == "adam":
            return AdamState(self.learning_rate, self.beta1, self.beta2, self.eps), adam_step
        return SgdState(self.learning_rate), sgd_step


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-based; 0 means no epoch ran
    stopped_early: bool = False

    @property
    def epochs_run(self) -> int:
        return len(self.val_loss)


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


def evaluate_loss(model, X, Y) -> float:
    pred = model.forward(X, "infer")[0]
    return mse(pred, Y)


def early_stopping_epochs(val_losses, patience: int) -> tuple[int, int]:
    """Replay the stopping rule over a loss sequence.

    Returns ``(epochs_run, best_epoch)`` with 1-based epochs.
    """
    best, best_epoch, since = math.inf, 0, 0
    for epoch, loss in enumerate(val_losses, start=1):
        if loss < best:
            best, best_epoch, since = loss, epoch, 0
        else:
            since += 1
            if since >= patience:
                return epoch, best_epoch
    return len(val_losses), best_epoch


def train_with_early_stopping(model, train_data, val_data, config: TrainConfig,
                              on_epoch: Callable[[int, float, float], None] | None = None):
    """Mini-batch training that restores the best-validation weights.

    ``train_data`` and ``val_data`` are ``(X, Y)`` pairs indexed along the
    first axis. Training stops once validation loss has failed to improve
    for ``config.patience`` consecutive epochs.
    """
    Xtr, Ytr = train_data
    Xva, Yva = val_data
    if len(Xtr) == 0 or len(Xva) == 0:
        raise ValueError("train and validation sets must be nonempty")
    rng = np.random.default_rng(config.seed)
    state, step = config.make_optimizer()
    params = model.params()
    history = TrainHistory()
    best_loss = evaluate_loss(model, Xva, Yva) if config.max_epochs == 0 else math.inf
    best_params = copy.deepcopy(params)
    since = 0
    n = len(Xtr)
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            pred, cache = model.forward(Xtr[idx], "train", config.dropout_rate, rng)
            loss = float(np.mean((pred - Ytr[idx]) ** 2))
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}")
            grads = model.backward(cache, mse_grad(pred, Ytr[idx]))
            step(params, grads, state)
            total += loss * len(idx)
        val = evaluate_loss(model, Xva, Yva)
        if not math.isfinite(val):
            raise NumericError(f"non-finite validation loss at epoch {epoch}")
        history.train_loss.append(total / n)
        history.val_loss.append(val)
        if on_epoch is not None:
            on_epoch(epoch, total / n, val)
        if val < best_loss:
            best_loss, history.best_epoch, since = val, epoch, 0
            best_params = copy.deepcopy(params)
        else:
            since += 1
            if since >= config.patience:
                history.stopped_early = True
                logger.debug("early stop at epoch %d (best %d)", epoch, history.best_epoch)
                break
    for name, p in params.items():
        p[...] = best_params[name]
    return model, history
