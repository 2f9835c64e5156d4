"""Classical comparators: FNN, BPNN, RBF network and GRNN.

All four read the same windows, splits and scalers as the LSTM pipeline,
with each window flattened into one input vector, and predict the
standardized (high, low, close) change jointly.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.vq import kmeans2

from .errors import DataError
from .nn import Mlp, TrainConfig, rmse, train_with_early_stopping
from .pipeline import derive_seed, report_from_predictions

logger = logging.getLogger(__name__)

RIDGE_LAMBDA = 1e-8
BASELINE_MODELS = ("fnn", "bpnn", "rbf", "grnn")


def flatten_windows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.reshape(len(X), -1) if X.ndim == 3 else np.atleast_2d(X)


def _as_2d_targets(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    return Y[:, None] if Y.ndim == 1 else Y


# ----------------------------------------------------------------------------
# feed-forward baselines


def _train_mlp(data, arch, config: TrainConfig, optimizer: str, seed: int):
    (X, Y), (Xv, Yv) = data
    X, Xv = flatten_windows(X), flatten_windows(Xv)
    Y, Yv = _as_2d_targets(Y), _as_2d_targets(Yv)
    model = Mlp.create(X.shape[1], list(arch), Y.shape[1], np.random.default_rng(seed))
    return train_with_early_stopping(model, (X, Y), (Xv, Yv), replace(config, optimizer=optimizer))


def train_fnn(data, arch, config: TrainConfig | None = None, seed: int = 0):
    """Feed-forward regressor trained with Adam. ``data`` is ``((X, Y), (Xv, Yv))``."""
    return _train_mlp(data, arch, config or TrainConfig(), "adam", seed)


def train_bpnn(data, arch, config: TrainConfig | None = None, seed: int = 0):
    """Same network trained by plain gradient descent at a fixed learning rate."""
    return _train_mlp(data, arch, config or TrainConfig(learning_rate=1e-2), "sgd", seed)


# ----------------------------------------------------------------------------
# RBF network


@dataclass
class RbfNetwork:
    centers: np.ndarray  # (m, features)
    widths: np.ndarray  # (m,)
    weights: np.ndarray  # (m + 1, outputs); last row is the bias

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.widths = np.broadcast_to(np.asarray(self.widths, dtype=float), (len(self.centers),)).copy()
        self.weights = _as_2d_targets(self.weights)
        if len(self.centers) < 1:
            raise ValueError("an RBF network needs at least one center")
        if not np.all(self.widths > 0):
            raise ValueError("RBF widths must be positive")
        if self.weights.shape[0] != len(self.centers) + 1:
            raise ValueError("weights need one row per center plus a bias row")

    def features(self, X) -> np.ndarray:
        X = flatten_windows(X)
        d2 = _sq_dists(X, self.centers)
        phi = np.exp(-d2 / (2.0 * self.widths ** 2))
        return np.hstack([phi, np.ones((len(X), 1))])

    def predict(self, X) -> np.ndarray:
        return self.features(X) @ self.weights


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def _solve_output_weights(phi: np.ndarray, Y: np.ndarray, ridge: float) -> np.ndarray:
    w, _, rank, _ = np.linalg.lstsq(phi, Y, rcond=None)
    if rank == phi.shape[1] and np.all(np.isfinite(w)):
        return w
    warnings.warn(f"singular RBF design matrix (rank {rank} < {phi.shape[1]}); using ridge {ridge:g}",
                  RuntimeWarning, stacklevel=3)
    k = phi.shape[1]
    A = np.vstack([phi, math.sqrt(ridge) * np.eye(k)])
    b = np.vstack([Y, np.zeros((k, Y.shape[1]))])
    return np.linalg.lstsq(A, b, rcond=None)[0]


def fit_rbf(X, Y, m: int, bandwidth: float, seed: int = 0, ridge: float = RIDGE_LAMBDA) -> RbfNetwork:
    """Centers by k-means on the inputs, output weights by least squares."""
    X, Y = flatten_windows(X), _as_2d_targets(Y)
    if not 1 <= m <= len(X):
        raise ValueError(f"need 1 <= m <= n_train, got m={m}, n_train={len(X)}")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    if m == len(X):
        centers = X.copy()
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty clusters are re-seeded below
            centers, labels = kmeans2(X, m, seed=np.random.default_rng(seed), minit="++")
        empty = np.setdiff1d(np.arange(m), labels)
        if len(empty):
            centers[empty] = X[np.random.default_rng(seed).choice(len(X), len(empty), replace=False)]
    net = RbfNetwork(centers, np.full(m, float(bandwidth)), np.zeros((m + 1, Y.shape[1])))
    net.weights = _solve_output_weights(net.features(X), Y, ridge)
    return net


def predict_rbf(model: RbfNetwork, x) -> np.ndarray:
    return model.predict(x)


# ----------------------------------------------------------------------------
# GRNN


@dataclass
class GrnnModel:
    inputs: np.ndarray  # (n, features)
    targets: np.ndarray  # (n, outputs)
    bandwidth: float

    def __post_init__(self):
        self.inputs = flatten_windows(self.inputs)
        self.targets = _as_2d_targets(self.targets)
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise ValueError("GRNN needs at least one (input, target) pair")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    def predict(self, X) -> np.ndarray:
        return predict_grnn(self, X)


def fit_grnn(X, Y, bandwidth: float) -> GrnnModel:
    return GrnnModel(X, Y, bandwidth)


def predict_grnn(model: GrnnModel, x) -> np.ndarray:
    """Nadaraya-Watson estimate with a Gaussian kernel.

    Rows whose kernel weights all underflow fall back to the nearest
    training target.
    """
    X = flatten_windows(x)
    d2 = _sq_dists(X, model.inputs)
    K = np.exp(-d2 / (2.0 * model.bandwidth ** 2))
    total = K.sum(axis=1)
    out = np.empty((len(X), model.targets.shape[1]))
    ok = total > 0
    out[ok] = (K[ok] @ model.targets) / total[ok, None]
    if not np.all(ok):
        warnings.warn(f"GRNN kernel weights underflowed for {int((~ok).sum())} queries; "
                      "using nearest-neighbour targets", RuntimeWarning, stacklevel=2)
        out[~ok] = model.targets[np.argmin(d2[~ok], axis=1)]
    return out


# ----------------------------------------------------------------------------
# grid search on the pipeline's splits


@dataclass
class BaselineGrid:
    """Candidate hyperparameters; bandwidths scale the median pairwise input distance."""

    hidden: list[tuple[int, ...]] = field(default_factory=lambda: [(16,), (32, 16)])
    rbf_centers: list[int] = field(default_factory=lambda: [16, 64])
    bandwidth_factors: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    train: TrainConfig = field(default_factory=lambda: TrainConfig(max_epochs=60, learning_rate=1e-3))
    bpnn_learning_rate: float = 1e-2


def median_distance(X: np.ndarray, max_points: int = 500) -> float:
    X = flatten_windows(X)[:max_points]
    d2 = _sq_dists(X, X)
    iu = np.triu_indices(len(X), 1)
    med = float(np.sqrt(np.median(d2[iu]))) if len(iu[0]) else 1.0
    return med if med > 0 else 1.0


@dataclass
class BaselineFit:
    name: str
    model: object
    params: dict
    val_rmse: float  # standardized units, averaged over outputs


def _val_rmse(model, Xv, Yv) -> float:
    return rmse(model.predict(Xv), Yv)


def select_baselines(tf, grid: BaselineGrid | None = None, seed: int = 0) -> dict[str, BaselineFit]:
    """Best configuration of each baseline by validation RMSE for one timeframe."""
    grid = grid or BaselineGrid()
    fit, val = tf.split.fit_indices(), tf.split.val_indices()
    X, Y = flatten_windows(tf.X[fit]), tf.Y[fit]
    Xv, Yv = flatten_windows(tf.X[val]), tf.Y[val]
    if len(X) < 2:
        raise DataError(f"{tf.name}: too few fitting samples for baselines")
    candidates: dict[str, list[BaselineFit]] = {k: [] for k in BASELINE_MODELS}
    for arch in grid.hidden:
        cfg = replace(grid.train, seed=seed)
        m, _ = train_fnn(((X, Y), (Xv, Yv)), arch, cfg, seed)
        candidates["fnn"].append(BaselineFit("fnn", m, {"hidden": arch}, _val_rmse(m, Xv, Yv)))
        m, _ = train_bpnn(((X, Y), (Xv, Yv)), arch, replace(cfg, learning_rate=grid.bpnn_learning_rate), seed)
        candidates["bpnn"].append(BaselineFit("bpnn", m, {"hidden": arch}, _val_rmse(m, Xv, Yv)))
    scale = median_distance(X)
    for factor in grid.bandwidth_factors:
        bw = factor * scale
        for n_c in grid.rbf_centers:
            if n_c > len(X):
                continue
            m = fit_rbf(X, Y, n_c, bw, seed)
            candidates["rbf"].append(BaselineFit("rbf", m, {"centers": n_c, "bandwidth": bw}, _val_rmse(m, Xv, Yv)))
        m = fit_grnn(X, Y, bw)
        candidates["grnn"].append(BaselineFit("grnn", m, {"bandwidth": bw}, _val_rmse(m, Xv, Yv)))
    best = {}
    for name, fits in candidates.items():
        finite = [f for f in fits if math.isfinite(f.val_rmse)]
        if finite:
            best[name] = min(finite, key=lambda f: f.val_rmse)
            logger.info("%s %s: %s (val rmse %.4f)", tf.name, name, best[name].params, best[name].val_rmse)
    return best


def baseline_reports(prep, grid: BaselineGrid | None = None, seed: int = 0):
    """One ``EvalReport`` per baseline model on both timeframes' test blocks."""
    preds: dict[str, dict] = {name: {} for name in BASELINE_MODELS}
    for tf in (prep.daily, prep.monthly):
        test = tf.split.test_indices
        fits = select_baselines(tf, grid, derive_seed(seed, "baseline", tf.name))
        for name, bf in fits.items():
            usd = tf.to_usd(bf.model.predict(flatten_windows(tf.X[test])), tf.current_close[test])
            preds[name][tf.name] = (usd, tf.Y_usd[test])
    reports = []
    for name in BASELINE_MODELS:
        p = preds[name]
        if "daily" not in p:
            continue
        m = p.get("monthly", (None, None))
        reports.append(report_from_predictions(*p["daily"], *m, model=name))
    return reports
