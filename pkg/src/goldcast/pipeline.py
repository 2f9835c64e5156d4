"""Nine-subnetwork forecaster: daily LSTMs, monthly LSTMs and fusion MLPs.

Each of the three price components (high, low, close) gets its own daily
LSTM, monthly LSTM and fusion MLP. Sample ``s`` of a timeframe uses the
window of feature rows ``[s, s + window)`` and predicts the bar after the
window's last row.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import (
    TARGET_COLUMNS,
    DatasetSplit,
    FeatureSet,
    NamedSeries,
    OhlcBar,
    Scaler,
    align_features,
    make_splits,
)
from .errors import DataError
from .gwo import ConvergenceTrace, GwoConfig, NetworkArch, gwo_minimize
from .lstm import LstmStack
from .nn import Mlp, TrainConfig, TrainHistory, mae, rmse, train_with_early_stopping

logger = logging.getLogger(__name__)

COMPONENTS = TARGET_COLUMNS
NETWORKS = ("daily_lstm", "monthly_lstm", "fusion_mlp")
TIMEFRAMES = ("daily", "monthly")


@dataclass(frozen=True, order=True)
class SubnetworkId:
    network: str
    component: str

    def __post_init__(self):
        if self.network not in NETWORKS or self.component not in COMPONENTS:
            raise ValueError(f"invalid subnetwork {self.network}/{self.component}")

    @property
    def key(self) -> str:
        return f"{self.network}_{self.component}"

    @property
    def column(self) -> int:
        return COMPONENTS.index(self.component)

    @classmethod
    def parse(cls, key: str) -> "SubnetworkId":
        for net in NETWORKS:
            if key.startswith(net + "_"):
                return cls(net, key[len(net) + 1:])
        raise ValueError(f"unknown subnetwork key {key!r}")


ALL_SUBNETWORKS = tuple(SubnetworkId(n, c) for n in NETWORKS for c in COMPONENTS)
LSTM_SUBNETWORKS = ALL_SUBNETWORKS[:6]
FUSION_SUBNETWORKS = ALL_SUBNETWORKS[6:]


@dataclass
class ForecastTriple:
    high: float
    low: float
    close: float
    horizon: str = "next_day"  # or "next_month"
    date: dt.date | None = None

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.high, self.low, self.close)):
            raise ValueError("forecast contains non-finite values")
        if self.horizon not in ("next_day", "next_month"):
            raise ValueError(f"unknown horizon {self.horizon!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.high, self.low, self.close])


@dataclass
class PipelineConfig:
    daily_window: int = 30
    monthly_window: int = 12
    k_folds: int = 4
    test_frac: float = 0.10
    train: TrainConfig = field(default_factory=TrainConfig)
    fusion_train: TrainConfig | None = None  # defaults to ``train``
    search_epochs: int = 10
    gwo: GwoConfig = field(default_factory=GwoConfig)
    fusion_val_frac: float = 0.25
    lstm_head_hidden: int = 0  # optional leaky-ReLU layer before the LSTM output
    seed: int = 0

    def fusion_config(self) -> TrainConfig:
        return self.fusion_train or self.train


def derive_seed(master: int, *labels) -> int:
    """Stable 32-bit seed from a master seed and string labels."""
    text = ":".join([str(master), *map(str, labels)])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "little")


@dataclass
class MarketData:
    daily_bars: list[OhlcBar]
    monthly_bars: list[OhlcBar]
    daily_aux: list[NamedSeries] = field(default_factory=list)
    monthly_aux: list[NamedSeries] = field(default_factory=list)


@dataclass
class Timeframe:
    """Windowed, standardized view of one timeframe's feature set.

    Networks see each window relative to its own last row and predict the
    z-scored change of the next bar's (high, low, close) from the current
    close, so a trending level never leaves the range seen in training.
    """

    name: str
    features: FeatureSet
    window: int
    split: DatasetSplit
    scaler: Scaler  # feature columns
    target_scaler: Scaler  # next-bar (high, low, close) minus current close, USD
    X: np.ndarray  # (n_samples, window, n_features)
    Y: np.ndarray  # (n_samples, 3), standardized changes
    Y_usd: np.ndarray  # (n_samples, 3), next-bar prices
    current_close: np.ndarray  # close of each window's last row, USD

    @property
    def n_samples(self) -> int:
        return len(self.X)

    def row_of(self, sample: int) -> int:
        return sample + self.window - 1

    def target_date(self, sample: int) -> dt.date:
        return self.features.target_dates[self.row_of(sample)]

    def window_at_row(self, row: int) -> np.ndarray:
        if row < self.window - 1 or row >= len(self.features.features):
            raise DataError(f"{self.name}: not enough history for a window ending at row {row}")
        z = self.scaler.transform(self.features.features[row - self.window + 1: row + 1])
        return z - z[-1]

    def close_at_row(self, row: int) -> float:
        return float(self.features.features[row, 2])

    def to_usd(self, z, anchor, cols=slice(0, 3)):
        """Price from a standardized change relative to ``anchor`` (current close)."""
        return _broadcast_anchor(anchor, z) + self.target_scaler.inverse(z, cols)

    def to_z(self, usd, anchor, cols=slice(0, 3)):
        return self.target_scaler.transform(np.asarray(usd, dtype=float) - _broadcast_anchor(anchor, usd), cols)


def _broadcast_anchor(anchor, like):
    a = np.asarray(anchor, dtype=float)
    return a[..., None] if np.ndim(like) > a.ndim else a


def _windows(z: np.ndarray, window: int) -> np.ndarray:
    w = sliding_window_view(z, window, axis=0).transpose(0, 2, 1)
    return np.ascontiguousarray(w - w[:, -1:, :])


def build_timeframe(name: str, fs: FeatureSet, window: int, k: int, test_frac: float,
                    min_test: int | None = None) -> Timeframe:
    n_samples = fs.n_rows - window + 1
    if n_samples < k + 1:
        raise DataError(f"{name}: only {max(n_samples, 0)} windowed samples; need at least {k + 1}")
    split = make_splits(n_samples, k, test_frac, window, min_test)
    fit = split.fit_indices()
    last_fit_row = int(fit[-1]) + window - 1
    scaler = Scaler.fit(fs.features[: last_fit_row + 1], fs.columns, allow_constant=True)
    X = _windows(scaler.transform(fs.features[:-1]), window)
    rows = np.arange(n_samples) + window - 1
    Y_usd = fs.targets[rows]
    close = fs.features[rows, 2].copy()
    rel = Y_usd - close[:, None]
    target_scaler = Scaler.fit(rel[fit], [f"d_{c}" for c in TARGET_COLUMNS], allow_constant=True)
    return Timeframe(name, fs, window, split, scaler, target_scaler, X, target_scaler.transform(rel),
                     Y_usd, close)


def _month_key(d: dt.date) -> tuple[int, int]:
    return (d.year, d.month)


def _prev_month(key):
    y, m = key
    return (y - 1, 12) if m == 1 else (y, m - 1)


@dataclass
class PreparedData:
    daily: Timeframe
    monthly: Timeframe
    config: PipelineConfig

    @property
    def test_cutoff(self) -> dt.date:
        """First target date of the daily test block."""
        return self.daily.target_date(int(self.daily.split.test_indices[0]))

    def monthly_row_for_day(self, day: dt.date) -> int | None:
        """Monthly feature row of the month before ``day``'s month, if any."""
        key = _prev_month(_month_key(day))
        return self._month_rows.get(key)

    def __post_init__(self):
        self._month_rows = {_month_key(d): i for i, d in enumerate(self.monthly.features.dates)}


def prepare(data: MarketData, config: PipelineConfig) -> PreparedData:
    """Align, window, split and standardize both timeframes.

    The monthly test block is widened so that no monthly training or
    validation target falls in a month that overlaps the daily test block.
    """
    dfs = align_features(data.daily_bars, data.daily_aux)
    daily = build_timeframe("daily", dfs, config.daily_window, config.k_folds, config.test_frac)
    cutoff = daily.target_date(int(daily.split.test_indices[0]))
    mfs = align_features(data.monthly_bars, data.monthly_aux)
    n_m = mfs.n_rows - config.monthly_window + 1
    overlap = sum(
        1 for s in range(max(n_m, 0))
        if _month_key(mfs.target_dates[s + config.monthly_window - 1]) >= _month_key(cutoff)
    )
    monthly = build_timeframe("monthly", mfs, config.monthly_window, config.k_folds, config.test_frac,
                              min_test=overlap)
    return PreparedData(daily, monthly, config)


# ----------------------------------------------------------------------------
# model construction and training


def build_model(sub: SubnetworkId, arch: NetworkArch, prep: PreparedData, seed: int):
    rng = np.random.default_rng(seed)
    cfg = prep.config
    if sub.network == "fusion_mlp":
        return Mlp.create(6, list(arch), 1, rng)
    tf = prep.daily if sub.network == "daily_lstm" else prep.monthly
    head = [cfg.lstm_head_hidden] if cfg.lstm_head_hidden > 0 else []
    return LstmStack.create(tf.X.shape[2], arch, rng, 1, head, tf.window)


def _lstm_data(sub: SubnetworkId, prep: PreparedData):
    tf = prep.daily if sub.network == "daily_lstm" else prep.monthly
    fit, val = tf.split.fit_indices(), tf.split.val_indices()
    c = sub.column
    return tf, (tf.X[fit], tf.Y[fit, c:c + 1]), (tf.X[val], tf.Y[val, c:c + 1])


def train_lstm(sub: SubnetworkId, arch: NetworkArch, prep: PreparedData, train_cfg: TrainConfig,
               seed: int):
    _, tr, va = _lstm_data(sub, prep)
    model = build_model(sub, arch, prep, derive_seed(seed, "init", sub.key))
    cfg = replace(train_cfg, seed=derive_seed(seed, "train", sub.key))
    return train_with_early_stopping(model, tr, va, cfg)


def lstm_val_rmse_usd(model, sub: SubnetworkId, prep: PreparedData) -> float:
    tf, _, (Xv, Yv) = _lstm_data(sub, prep)
    return rmse(model.predict(Xv), Yv) * tf.target_scaler.std[sub.column]


def lstm_outputs(models: dict[str, object], X: np.ndarray) -> np.ndarray:
    """Raw (standardized) outputs of the three component LSTMs, ``(n, 3)``."""
    return np.column_stack([models[c].predict(X)[:, 0] for c in COMPONENTS])


def monthly_forecasts(monthly_models: dict[str, object], prep: PreparedData) -> dict[int, np.ndarray]:
    """USD forecast for the month after each monthly row that has a full window."""
    tf = prep.monthly
    z_all = tf.scaler.transform(tf.features.features)
    rows = np.arange(tf.window - 1, len(z_all))
    usd = tf.to_usd(lstm_outputs(monthly_models, _windows(z_all, tf.window)), tf.features.features[rows, 2])
    return {int(r): usd[i] for i, r in enumerate(rows)}


@dataclass
class FusionInputs:
    """Raw fusion features for daily samples that have a monthly forecast.

    Columns: three daily LSTM outputs, then the monthly (high, low, close)
    forecast expressed as a standardized change from the current daily close.
    """

    samples: np.ndarray
    X: np.ndarray  # (n, 6)


def fusion_inputs(daily_models, monthly_models, prep: PreparedData, samples) -> FusionInputs:
    samples = np.asarray(samples, dtype=int)
    mf = monthly_forecasts(monthly_models, prep)
    keep, m_usd = [], []
    for s in samples:
        row = prep.monthly_row_for_day(prep.daily.target_date(int(s)))
        if row is not None and row in mf:
            keep.append(int(s))
            m_usd.append(mf[row])
    keep = np.array(keep, dtype=int)
    if len(keep) == 0:
        return FusionInputs(keep, np.empty((0, 6)))
    d = lstm_outputs(daily_models, prep.daily.X[keep])
    m = prep.daily.to_z(np.array(m_usd), prep.daily.current_close[keep])
    return FusionInputs(keep, np.hstack([d, m]))


@dataclass
class FusionData:
    inputs: FusionInputs
    scaler: Scaler  # standardizes the six fusion features
    fit: np.ndarray  # positions into ``inputs``
    val: np.ndarray

    def xy(self, prep: PreparedData, component: int, part: np.ndarray):
        s = self.inputs.samples[part]
        return self.scaler.transform(self.inputs.X[part]), prep.daily.Y[s, component:component + 1]


FUSION_COLUMNS = [f"daily_{c}" for c in COMPONENTS] + [f"monthly_{c}" for c in COMPONENTS]


def make_fusion_data(daily_models, monthly_models, prep: PreparedData) -> FusionData:
    """Fusion training set: LSTM forecasts over the daily validation fold.

    The fold is cut chronologically into a fitting part and a final
    ``fusion_val_frac`` used for early stopping and search fitness.
    """
    inp = fusion_inputs(daily_models, monthly_models, prep, prep.daily.split.val_indices())
    n = len(inp.samples)
    n_val = max(1, int(round(n * prep.config.fusion_val_frac)))
    if n - n_val < 2:
        raise DataError("too few validation-period samples with a monthly forecast to train the fusion network")
    fit, val = np.arange(n - n_val), np.arange(n - n_val, n)
    scaler = Scaler.fit(inp.X[fit], FUSION_COLUMNS, allow_constant=True)
    return FusionData(inp, scaler, fit, val)


def train_fusion(sub: SubnetworkId, arch: NetworkArch, prep: PreparedData, fd: FusionData,
                 train_cfg: TrainConfig, seed: int):
    model = build_model(sub, arch, prep, derive_seed(seed, "init", sub.key))
    cfg = replace(train_cfg, seed=derive_seed(seed, "train", sub.key))
    return train_with_early_stopping(model, fd.xy(prep, sub.column, fd.fit), fd.xy(prep, sub.column, fd.val), cfg)


def fusion_val_rmse_usd(model, sub: SubnetworkId, prep: PreparedData, fd: FusionData) -> float:
    X, Y = fd.xy(prep, sub.column, fd.val)
    return rmse(model.predict(X), Y) * prep.daily.target_scaler.std[sub.column]


# ----------------------------------------------------------------------------
# architecture search


@dataclass
class SearchResult:
    archs: dict[SubnetworkId, NetworkArch]
    traces: dict[SubnetworkId, ConvergenceTrace] = field(default_factory=dict)
    best_fitness: dict[SubnetworkId, float] = field(default_factory=dict)
    evaluations: dict[SubnetworkId, int] = field(default_factory=dict)
    cache_hits: dict[SubnetworkId, int] = field(default_factory=dict)
    lstm_models: dict[SubnetworkId, object] = field(default_factory=dict)
    lstm_histories: dict[SubnetworkId, TrainHistory] = field(default_factory=dict)


def _search(sub: SubnetworkId, fitness, prep: PreparedData, result: SearchResult):
    cfg = replace(prep.config.gwo, seed=derive_seed(prep.config.seed, "gwo", sub.key))
    logger.info("searching %s", sub.key)
    res = gwo_minimize(fitness, cfg)
    result.archs[sub] = res.best
    result.traces[sub] = res.trace
    result.best_fitness[sub] = res.best_fitness
    result.evaluations[sub] = res.evaluations
    result.cache_hits[sub] = res.cache_hits
    logger.info("%s -> %s (val rmse %.4f, %d evaluations, %d cached)",
                sub.key, res.best, res.best_fitness, res.evaluations, res.cache_hits)


def optimize_architectures(prep: PreparedData, fixed: dict[SubnetworkId, NetworkArch] | None = None) -> SearchResult:
    """One GWO search per subnetwork; ``fixed`` entries skip their search.

    LSTM fitness is the validation-fold RMSE (USD) after ``search_epochs`` of
    training on the preceding folds. The fusion search needs trained LSTMs,
    so those are trained in full with the chosen architectures and returned
    in ``lstm_models`` for :func:`train_all` to reuse.
    """
    cfg = prep.config
    search_cfg = replace(cfg.train, max_epochs=cfg.search_epochs)
    fixed = dict(fixed or {})
    result = SearchResult({})
    for sub in LSTM_SUBNETWORKS:
        if sub in fixed:
            result.archs[sub] = fixed[sub]
            continue

        def fitness(arch, sub=sub):
            model, _ = train_lstm(sub, arch, prep, search_cfg, cfg.seed)
            return lstm_val_rmse_usd(model, sub, prep)

        _search(sub, fitness, prep, result)

    for sub in LSTM_SUBNETWORKS:
        logger.info("training %s %s", sub.key, result.archs[sub])
        result.lstm_models[sub], result.lstm_histories[sub] = train_lstm(sub, result.archs[sub], prep, cfg.train, cfg.seed)
    fd = make_fusion_data(*_split_lstm_models(result.lstm_models), prep)
    fusion_search_cfg = replace(cfg.fusion_config(), max_epochs=cfg.search_epochs)
    for sub in FUSION_SUBNETWORKS:
        if sub in fixed:
            result.archs[sub] = fixed[sub]
            continue

        def fitness(arch, sub=sub):
            model, _ = train_fusion(sub, arch, prep, fd, fusion_search_cfg, cfg.seed)
            return fusion_val_rmse_usd(model, sub, prep, fd)

        _search(sub, fitness, prep, result)
    return result


def _split_lstm_models(models: dict[SubnetworkId, object]):
    daily = {s.component: m for s, m in models.items() if s.network == "daily_lstm"}
    monthly = {s.component: m for s, m in models.items() if s.network == "monthly_lstm"}
    return daily, monthly


# ----------------------------------------------------------------------------
# trained ensemble


@dataclass
class ForecastModels:
    models: dict[SubnetworkId, object]
    archs: dict[SubnetworkId, NetworkArch]
    fusion_scaler: Scaler
    histories: dict[SubnetworkId, TrainHistory] = field(default_factory=dict)

    @property
    def daily(self) -> dict[str, object]:
        return {c: self.models[SubnetworkId("daily_lstm", c)] for c in COMPONENTS}

    @property
    def monthly(self) -> dict[str, object]:
        return {c: self.models[SubnetworkId("monthly_lstm", c)] for c in COMPONENTS}

    def fusion(self, component: str):
        return self.models[SubnetworkId("fusion_mlp", component)]

    def fuse(self, raw_inputs: np.ndarray) -> np.ndarray:
        """Standardized fused triples from raw six-column fusion features."""
        x = self.fusion_scaler.transform(np.atleast_2d(raw_inputs))
        return np.column_stack([self.fusion(c).predict(x)[:, 0] for c in COMPONENTS])


def train_all(archs: dict[SubnetworkId, NetworkArch], prep: PreparedData,
              pretrained: dict[SubnetworkId, object] | None = None,
              pretrained_histories: dict[SubnetworkId, TrainHistory] | None = None) -> ForecastModels:
    """Train the nine subnetworks with fixed architectures.

    LSTMs fit on the first k-1 folds and early-stop on the last. Fusion MLPs
    learn from the LSTMs' forecasts over that validation fold. Pretrained
    LSTMs whose layer sizes match ``archs`` are reused as-is.
    """
    cfg = prep.config
    models, hist = {}, {}
    pretrained = pretrained or {}
    pretrained_histories = pretrained_histories or {}
    for sub in LSTM_SUBNETWORKS:
        model = pretrained.get(sub)
        if model is not None and tuple(model.hidden_sizes) == tuple(archs[sub]):
            models[sub] = model
            if sub in pretrained_histories:
                hist[sub] = pretrained_histories[sub]
            continue
        logger.info("training %s %s", sub.key, archs[sub])
        models[sub], hist[sub] = train_lstm(sub, archs[sub], prep, cfg.train, cfg.seed)
    fd = make_fusion_data(*_split_lstm_models(models), prep)
    for sub in FUSION_SUBNETWORKS:
        logger.info("training %s %s", sub.key, archs[sub])
        models[sub], hist[sub] = train_fusion(sub, archs[sub], prep, fd, cfg.fusion_config(), cfg.seed)
    return ForecastModels(models, {s: archs[s] for s in ALL_SUBNETWORKS}, fd.scaler, hist)


# ----------------------------------------------------------------------------
# inference


def predict_samples(fm: ForecastModels, prep: PreparedData, samples) -> tuple[np.ndarray, np.ndarray]:
    """Fused next-day USD forecasts for daily samples; returns ``(samples_kept, preds)``."""
    inp = fusion_inputs(fm.daily, fm.monthly, prep, samples)
    if len(inp.samples) == 0:
        return inp.samples, np.empty((0, 3))
    return inp.samples, prep.daily.to_usd(fm.fuse(inp.X), prep.daily.current_close[inp.samples])


def predict_monthly_samples(fm: ForecastModels, prep: PreparedData, samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=int)
    tf = prep.monthly
    return tf.to_usd(lstm_outputs(fm.monthly, tf.X[samples]), tf.current_close[samples])


def next_trading_day(d: dt.date) -> dt.date:
    d += dt.timedelta(days=1)
    while d.weekday() >= 5:
        d += dt.timedelta(days=1)
    return d


def predict_next_day(fm: ForecastModels, prep: PreparedData,
                     next_day: dt.date | None = None) -> tuple[ForecastTriple, ForecastTriple]:
    """Forecast the bar after the last daily bar and the month containing it."""
    daily, monthly = prep.daily, prep.monthly
    last_row = len(daily.features.features) - 1
    if last_row < daily.window - 1:
        raise DataError("insufficient daily history for the lookback window")
    next_day = next_day or next_trading_day(daily.features.dates[-1])
    close_now = daily.close_at_row(last_row)
    d_out = lstm_outputs(fm.daily, daily.window_at_row(last_row)[None])
    mrow = prep.monthly_row_for_day(next_day)
    if mrow is None or mrow < monthly.window - 1:
        raise DataError(f"insufficient monthly history before {next_day}")
    m_out = lstm_outputs(fm.monthly, monthly.window_at_row(mrow)[None])
    m_usd = monthly.to_usd(m_out, monthly.close_at_row(mrow))[0]
    raw = np.hstack([d_out[0], daily.to_z(m_usd, close_now)])
    day_usd = daily.to_usd(fm.fuse(raw)[0], close_now)
    return (ForecastTriple(*map(float, day_usd), horizon="next_day", date=next_day),
            ForecastTriple(*map(float, m_usd), horizon="next_month", date=next_day.replace(day=1)))


# ----------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    """RMSE/MAE in USD per (timeframe, component)."""

    cells: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    model: str = "lstm_mlp"

    def rmse(self, timeframe: str, component: str) -> float:
        return self.cells[(timeframe, component)][0]

    def mae(self, timeframe: str, component: str) -> float:
        return self.cells[(timeframe, component)][1]

    def rows(self):
        for tf in TIMEFRAMES:
            for comp in COMPONENTS:
                if (tf, comp) in self.cells:
                    r, m = self.cells[(tf, comp)]
                    yield tf, comp, r, m


def report_from_predictions(daily_pred, daily_true, monthly_pred=None, monthly_true=None,
                            model: str = "lstm_mlp") -> EvalReport:
    rep = EvalReport(model=model)
    for tf, pred, true in (("daily", daily_pred, daily_true), ("monthly", monthly_pred, monthly_true)):
        if pred is None:
            continue
        pred, true = np.asarray(pred), np.asarray(true)
        if len(true) == 0:
            raise DataError(f"empty {tf} test set")
        for c, comp in enumerate(COMPONENTS):
            rep.cells[(tf, comp)] = (rmse(pred[:, c], true[:, c]), mae(pred[:, c], true[:, c]))
    return rep


def evaluate(fm: ForecastModels, prep: PreparedData) -> EvalReport:
    """Test-block errors: fused daily forecasts and monthly LSTM forecasts."""
    test = prep.daily.split.test_indices
    kept, pred = predict_samples(fm, prep, test)
    if len(kept) != len(test):
        raise DataError("some daily test samples lack a monthly forecast")
    mtest = prep.monthly.split.test_indices
    mpred = predict_monthly_samples(fm, prep, mtest)
    return report_from_predictions(pred, prep.daily.Y_usd[kept], mpred, prep.monthly.Y_usd[mtest])


def persistence_report(prep: PreparedData) -> EvalReport:
    """Errors of predicting every component of the next bar as the current close."""
    def naive(tf):
        idx = tf.split.test_indices
        return np.repeat(tf.current_close[idx, None], 3, axis=1), tf.Y_usd[idx]

    dp, dt_ = naive(prep.daily)
    mp, mt = naive(prep.monthly)
    return report_from_predictions(dp, dt_, mp, mt, model="persistence")


def persistence_close_rmse(prep: PreparedData) -> float:
    idx = prep.daily.split.test_indices
    return rmse(prep.daily.current_close[idx], prep.daily.Y_usd[idx, 2])


EVAL_HEADER = ["timeframe", "component", "rmse", "mae", "model"]


def write_eval_csv(reports: Sequence[EvalReport], path) -> None:
    """``timeframe,component,rmse,mae,model``; one block of rows per report."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVAL_HEADER)
        for rep in reports:
            for tf, comp, r, m in rep.rows():
                w.writerow([tf, comp, f"{r:.10g}", f"{m:.10g}", rep.model])


def read_eval_csv(path) -> list[EvalReport]:
    reports: dict[str, EvalReport] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rep = reports.setdefault(row.get("model") or "lstm_mlp", EvalReport(model=row.get("model") or "lstm_mlp"))
            rep.cells[(row["timeframe"], row["component"])] = (float(row["rmse"]), float(row["mae"]))
    return list(reports.values())
