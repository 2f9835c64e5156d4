"""Stacked LSTM regressor with backpropagation through time.

Gate rows are ordered ``[input, forget, output, candidate]``; each block has
``hidden_size`` rows. Sequences are batched as ``(batch, T, features)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Mlp, dropout_mask, glorot_uniform


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmCell:
    input_weights: np.ndarray  # (4H, in)
    recurrent_weights: np.ndarray  # (4H, H)
    gate_biases: np.ndarray  # (4H,)

    def __post_init__(self):
        self.input_weights = np.asarray(self.input_weights, dtype=float)
        self.recurrent_weights = np.asarray(self.recurrent_weights, dtype=float)
        self.gate_biases = np.asarray(self.gate_biases, dtype=float)
        h = self.hidden_size
        if self.input_weights.shape[0] != 4 * h or self.recurrent_weights.shape != (4 * h, h) \
                or self.gate_biases.shape != (4 * h,):
            raise ValueError("inconsistent LSTM gate parameter shapes")

    @classmethod
    def create(cls, n_in: int, hidden: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmCell":
        W = glorot_uniform(rng, 4 * hidden, n_in, fan_in=n_in, fan_out=hidden)
        U = glorot_uniform(rng, 4 * hidden, hidden, fan_in=hidden, fan_out=hidden)
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = forget_bias
        return cls(W, U, b)

    @property
    def hidden_size(self) -> int:
        return self.recurrent_weights.shape[1]

    @property
    def n_in(self) -> int:
        return self.input_weights.shape[1]


def lstm_cell_step(cell: LstmCell, x_t, h_prev, c_prev):
    """One LSTM step. Returns ``(h_t, c_t, cache)``; works on vectors or batches."""
    x_t = np.asarray(x_t, dtype=float)
    h_prev = np.asarray(h_prev, dtype=float)
    c_prev = np.asarray(c_prev, dtype=float)
    if x_t.shape[-1] != cell.n_in or h_prev.shape[-1] != cell.hidden_size or c_prev.shape != h_prev.shape:
        raise ValueError("dimension mismatch in lstm_cell_step")
    H = cell.hidden_size
    z = x_t @ cell.input_weights.T + h_prev @ cell.recurrent_weights.T + cell.gate_biases
    sg = sigmoid(z[..., :3 * H])
    i, f, o = sg[..., :H], sg[..., H:2 * H], sg[..., 2 * H:]
    g = np.tanh(z[..., 3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c, {"i": i, "f": f, "o": o, "g": g, "c": c, "c_prev": c_prev, "h_prev": h_prev, "x": x_t}


@dataclass
class _LayerCache:
    x: np.ndarray  # (B, T, in)
    gates: np.ndarray  # (T, B, 4H) activated
    c: np.ndarray  # (T + 1, B, H); c[0] is the initial state
    h: np.ndarray  # (T + 1, B, H)
    tanh_c: np.ndarray  # (T, B, H)
    mask: np.ndarray | None  # dropout mask on this layer's output sequence


@dataclass
class StackCache:
    layers: list
    head: list
    squeeze: bool


def _layer_forward(cell: LstmCell, X: np.ndarray):
    B, T, _ = X.shape
    H = cell.hidden_size
    UT = cell.recurrent_weights.T
    xz = X @ cell.input_weights.T + cell.gate_biases  # (B, T, 4H)
    gates = np.empty((T, B, 4 * H))
    c = np.zeros((T + 1, B, H))
    h = np.zeros((T + 1, B, H))
    tanh_c = np.empty((T, B, H))
    for t in range(T):
        z = xz[:, t, :] + h[t] @ UT
        gt = gates[t]
        gt[:, :3 * H] = sigmoid(z[:, :3 * H])
        gt[:, 3 * H:] = np.tanh(z[:, 3 * H:])
        c[t + 1] = gt[:, H:2 * H] * c[t] + gt[:, :H] * gt[:, 3 * H:]
        tanh_c[t] = np.tanh(c[t + 1])
        h[t + 1] = gt[:, 2 * H:3 * H] * tanh_c[t]
    return h[1:].transpose(1, 0, 2), _LayerCache(X, gates, c, h, tanh_c, None)


def _layer_backward(cell: LstmCell, cache: _LayerCache, dH: np.ndarray):
    """BPTT through one layer; ``dH`` is ``(B, T, H)`` w.r.t. its output sequence."""
    T, B, _ = cache.gates.shape
    H = cell.hidden_size
    U = cell.recurrent_weights
    dZ = np.empty((T, B, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dU = np.zeros_like(U)
    for t in range(T - 1, -1, -1):
        gt = cache.gates[t]
        i, f, o, g = gt[:, :H], gt[:, H:2 * H], gt[:, 2 * H:3 * H], gt[:, 3 * H:]
        tc = cache.tanh_c[t]
        dh = dH[:, t, :] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H:2 * H] = dc * cache.c[t] * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dc * i * (1.0 - g * g)
        dU += dz.T @ cache.h[t]
        dh_next = dz @ U
        dc_next = dc * f
    dZb = dZ.transpose(1, 0, 2)  # (B, T, 4H)
    flat = dZb.reshape(-1, 4 * H)
    dW = flat.T @ cache.x.reshape(-1, cache.x.shape[2])
    db = flat.sum(axis=0)
    dX = dZb @ cell.input_weights
    return dX, {"W": dW, "U": dU, "b": db}


class LstmStack:
    """Three (or more) stacked LSTM layers feeding a dense head.

    Dropout acts on the hidden-state sequence passed between stacked
    layers, never on recurrent connections or the head input.
    """

    def __init__(self, layers: list[LstmCell], head: Mlp, window_len: int | None = None):
        for a, b in zip(layers, layers[1:]):
            if a.hidden_size != b.n_in:
                raise ValueError("layer output size must equal next layer input size")
        if head.n_in != layers[-1].hidden_size:
            raise ValueError("head input size must equal last hidden size")
        self.layers = layers
        self.head = head
        self.window_len = window_len

    @classmethod
    def create(cls, n_features: int, hidden_sizes, rng: np.random.Generator, n_outputs: int = 1,
               head_hidden=(), window_len: int | None = None, alpha: float = 0.01) -> "LstmStack":
        sizes = [n_features, *[int(h) for h in hidden_sizes]]
        layers = [LstmCell.create(a, b, rng) for a, b in zip(sizes, sizes[1:])]
        head = Mlp.create(sizes[-1], list(head_hidden), n_outputs, rng, alpha)
        return cls(layers, head, window_len)

    @property
    def hidden_sizes(self) -> list[int]:
        return [c.hidden_size for c in self.layers]

    @property
    def n_features(self) -> int:
        return self.layers[0].n_in

    @property
    def n_outputs(self) -> int:
        return self.head.n_outputs

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for l, cell in enumerate(self.layers):
            out[f"lstm{l}.W"] = cell.input_weights
            out[f"lstm{l}.U"] = cell.recurrent_weights
            out[f"lstm{l}.b"] = cell.gate_biases
        for name, p in self.head.params().items():
            out[f"head.{name}"] = p
        return out

    def forward(self, X, mode: str = "infer", dropout_rate: float = 0.0, rng=None):
        X = np.asarray(X, dtype=float)
        squeeze = X.ndim == 2
        X = X[None] if squeeze else X
        if X.ndim != 3 or X.shape[2] != self.n_features:
            raise ValueError(f"expected (batch, T, {self.n_features}) input, got {X.shape}")
        if self.window_len is not None and X.shape[1] != self.window_len:
            raise ValueError(f"window length {X.shape[1]} != configured {self.window_len}")
        caches = []
        seq = X
        last = len(self.layers) - 1
        for l, cell in enumerate(self.layers):
            seq, c = _layer_forward(cell, seq)
            if mode == "train" and dropout_rate > 0 and l < last:
                if rng is None:
                    raise ValueError("train-mode dropout needs an rng")
                c.mask = dropout_mask(seq.shape, dropout_rate, rng)
                seq = seq * c.mask
            caches.append(c)
        out, head_cache = self.head.forward(seq[:, -1, :], "infer")
        cache = StackCache(caches, head_cache, squeeze)
        return (out[0] if squeeze else out), cache

    def backward(self, cache: StackCache | None, grad_pred) -> dict[str, np.ndarray]:
        if cache is None or len(cache.layers) != len(self.layers):
            raise ValueError("missing or mismatched forward cache")
        g = np.asarray(grad_pred, dtype=float)
        g = g[None] if cache.squeeze else g
        head_grads, gh = self.head.backward(cache.head, g, return_input_grad=True)
        grads = {f"head.{k}": v for k, v in head_grads.items()}
        top = cache.layers[-1]
        B, T = top.x.shape[0], top.x.shape[1]
        dH = np.zeros((B, T, self.layers[-1].hidden_size))
        dH[:, -1, :] = gh
        for l in range(len(self.layers) - 1, -1, -1):
            dX, lg = _layer_backward(self.layers[l], cache.layers[l], dH)
            grads[f"lstm{l}.W"] = lg["W"]
            grads[f"lstm{l}.U"] = lg["U"]
            grads[f"lstm{l}.b"] = lg["b"]
            if l > 0:
                below = cache.layers[l - 1]
                dH = dX * below.mask if below.mask is not None else dX
        return grads

    def predict(self, X) -> np.ndarray:
        return self.forward(X, "infer")[0]


def lstm_forward(stack: LstmStack, sequence, mode: str = "infer", dropout_rate: float = 0.0, rng=None):
    """Scalar prediction for one ``[T x features]`` window plus its cache."""
    out, cache = stack.forward(sequence, mode, dropout_rate, rng)
    return float(out[0]) if np.ndim(out) == 1 and out.shape[0] == 1 else out, cache


def lstm_backward(stack: LstmStack, cache, loss_grad):
    return stack.backward(cache, np.atleast_1d(np.asarray(loss_grad, dtype=float)))
