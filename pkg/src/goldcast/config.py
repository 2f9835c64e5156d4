"""Run configuration: a flat ``key = value`` text file with ``#`` comments.

Relative paths resolve against the config file's directory. Keys and
defaults are listed in :data:`DEFAULTS`; unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .backtest import TradingParams
from .errors import ConfigError, DataError
from .gwo import GwoConfig
from .nn import TrainConfig
from .pipeline import PipelineConfig

# key -> (type, default); None default means optional/empty
DEFAULTS: dict[str, tuple[type, object]] = {
    # data
    "daily_csv": (str, None),
    "monthly_csv": (str, None),  # derived from daily bars when empty
    "macro_csv": (str, None),
    "daily_aux": (str, ""),  # comma-separated CSV paths, one series each
    # windows and splits
    "daily_window": (int, 30),
    "monthly_window": (int, 12),
    "k_folds": (int, 4),
    "test_frac": (float, 0.10),
    # training
    "max_epochs": (int, 100),
    "patience": (int, 5),
    "dropout_rate": (float, 0.01),
    "batch_size": (int, 32),
    "learning_rate": (float, 1e-3),
    "search_epochs": (int, 10),
    "fusion_val_frac": (float, 0.25),
    "lstm_head_hidden": (int, 0),
    # grey wolf search
    "gwo_herd_size": (int, 5),
    "gwo_iterations": (int, 10),
    "gwo_lower_bound": (int, 2),
    "gwo_upper_bound": (int, 1024),
    "gwo_workers": (int, 1),
    # trading
    "initial_balance": (float, 1000.0),
    "risk_fraction": (float, 0.05),
    "leverage": (float, 100.0),
    "tick": (float, 0.01),
    "lot_step": (float, 0.01),
    "reward_risk": (float, 3.0),
    # baselines
    "baselines": (bool, True),
    "seed": (int, 0),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def with_overrides(self, **kw) -> "RunConfig":
        vals = dict(self.values)
        for k, v in kw.items():
            if v is not None:
                if k not in DEFAULTS:
                    raise ConfigError(f"unknown config key {k!r}")
                vals[k] = v
        cfg = RunConfig(vals, self.base_dir)
        cfg.validate()
        return cfg

    # -- paths

    def path(self, key: str) -> Path | None:
        raw = self.values.get(key)
        return None if not raw else (self.base_dir / raw)

    def aux_paths(self) -> list[Path]:
        return [self.base_dir / p.strip() for p in self.values["daily_aux"].split(",") if p.strip()]

    def check_files(self) -> None:
        daily = self.path("daily_csv")
        if daily is None:
            raise ConfigError("daily_csv is required")
        for p in [daily, self.path("monthly_csv"), self.path("macro_csv"), *self.aux_paths()]:
            if p is not None and not p.is_file():
                raise DataError(f"data file not found: {p}")

    # -- derived module configs

    def train_config(self) -> TrainConfig:
        v = self.values
        return TrainConfig(max_epochs=v["max_epochs"], patience=v["patience"], dropout_rate=v["dropout_rate"],
                           batch_size=v["batch_size"], learning_rate=v["learning_rate"])

    def gwo_config(self) -> GwoConfig:
        v = self.values
        return GwoConfig(herd_size=v["gwo_herd_size"], iterations=v["gwo_iterations"],
                         lower_bound=v["gwo_lower_bound"], upper_bound=v["gwo_upper_bound"],
                         workers=v["gwo_workers"])

    def pipeline_config(self) -> PipelineConfig:
        v = self.values
        return PipelineConfig(daily_window=v["daily_window"], monthly_window=v["monthly_window"],
                              k_folds=v["k_folds"], test_frac=v["test_frac"], train=self.train_config(),
                              search_epochs=v["search_epochs"], gwo=self.gwo_config(),
                              fusion_val_frac=v["fusion_val_frac"], lstm_head_hidden=v["lstm_head_hidden"],
                              seed=v["seed"])

    def trading_params(self) -> TradingParams:
        v = self.values
        return TradingParams(risk_fraction=v["risk_fraction"], leverage=v["leverage"], tick=v["tick"],
                             lot_step=v["lot_step"], reward_risk=v["reward_risk"])

    def validate(self) -> None:
        v = self.values
        checks = [
            ("daily_window", v["daily_window"] >= 1),
            ("monthly_window", v["monthly_window"] >= 1),
            ("k_folds", v["k_folds"] >= 2),
            ("test_frac", 0 < v["test_frac"] < 1),
            ("search_epochs", v["search_epochs"] >= 0),
            ("fusion_val_frac", 0 < v["fusion_val_frac"] < 1),
            ("lstm_head_hidden", v["lstm_head_hidden"] >= 0),
            ("gwo_workers", v["gwo_workers"] >= 1),
            ("gwo_lower_bound", v["gwo_lower_bound"] >= 1),
            ("initial_balance", v["initial_balance"] > 0),
        ]
        for key, ok in checks:
            if not ok:
                raise ConfigError(f"{key} = {v[key]!r} is out of range")
        try:
            self.train_config()
            self.gwo_config()
            self.trading_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    # -- identity

    def canonical_text(self) -> str:
        return "".join(f"{k} = {_render(self.values[k])}\n" for k in DEFAULTS)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _render(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key: str, raw: str):
    typ, default = DEFAULTS[key]
    raw = raw.strip()
    if typ is str:
        return raw or default
    if raw == "":
        return default
    try:
        if typ is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}") from None


def parse_config(text: str, base_dir=".") -> RunConfig:
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",), interpolation=None)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    values = {k: d for k, (_, d) in DEFAULTS.items()}
    for key, raw in parser["run"].items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw)
    cfg = RunConfig(values, Path(base_dir))
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), path.parent)


def render_config(values: dict) -> str:
    """Config text for ``values`` (missing keys take their defaults)."""
    merged = {k: d for k, (_, d) in DEFAULTS.items()}
    merged.update(values)
    return "".join(f"{k} = {_render(merged[k])}\n" for k in DEFAULTS)
