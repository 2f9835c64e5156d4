"""Market data ingestion, feature alignment, standardization and splits.

CSV layouts
-----------
OHLC:   ``date,open,high,low,close,volume`` (ISO dates; monthly files may use ``YYYY-MM``)
Macro:  ``period,gdp,cpi,ppi,unemployment,inflation`` (``YYYY-MM``)
Aux:    ``date,value``
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

OHLC_HEADER = ["date", "open", "high", "low", "close", "volume"]
MACRO_HEADER = ["period", "gdp", "cpi", "ppi", "unemployment", "inflation"]
AUX_HEADER = ["date", "value"]
MACRO_FIELDS = MACRO_HEADER[1:]
TARGET_COLUMNS = ("high", "low", "close")
RESOLUTIONS = ("daily", "monthly")


@dataclass(frozen=True)
class OhlcBar:
    timestamp: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        vals = (self.open, self.high, self.low, self.close, self.volume)
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"non-finite value in bar {self.timestamp}")
        if self.high < self.low:
            raise DataError(f"high < low in bar {self.timestamp}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise DataError(f"open/close outside [low, high] in bar {self.timestamp}")
        if self.volume < 0:
            raise DataError(f"negative volume in bar {self.timestamp}")


@dataclass(frozen=True)
class MacroRecord:
    period: dt.date  # first day of the month
    gdp: float
    cpi: float
    ppi: float
    unemployment_rate: float
    inflation_rate: float


@dataclass(frozen=True)
class NamedSeries:
    """A dated auxiliary series; ``dates`` are publication dates, ascending."""

    name: str
    dates: tuple[dt.date, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise DataError(f"series {self.name!r}: dates and values differ in length")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise DataError(f"series {self.name!r}: dates not strictly increasing at {b}")


@dataclass
class StandardizedSeries:
    values: np.ndarray
    mean: float
    std: float
    name: str = ""

    def destandardize(self, z=None):
        z = self.values if z is None else np.asarray(z, dtype=float)
        return z * self.std + self.mean


@dataclass
class DatasetSplit:
    train_folds: list[np.ndarray]
    test_indices: np.ndarray
    window_len: int = 1

    @property
    def n_samples(self) -> int:
        return sum(len(f) for f in self.train_folds) + len(self.test_indices)

    def fit_indices(self) -> np.ndarray:
        """Sample indices used for fitting: every fold except the last."""
        return np.concatenate(self.train_folds[:-1])

    def val_indices(self) -> np.ndarray:
        return self.train_folds[-1]

    def non_test_indices(self) -> np.ndarray:
        return np.concatenate(self.train_folds)


@dataclass
class FeatureSet:
    """Aligned features: one row per bar, plus next-period targets.

    ``features`` has one row per bar (including the last, which has no
    target); ``targets[i]`` is the (high, low, close) of bar ``i + 1``.
    """

    dates: list[dt.date]
    columns: list[str]
    features: np.ndarray
    targets: np.ndarray
    target_dates: list[dt.date] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.targets)


def _parse_date(text: str, resolution: str) -> dt.date:
    text = text.strip()
    if resolution == "monthly" and len(text) == 7:
        return dt.date.fromisoformat(text + "-01")
    return dt.date.fromisoformat(text)


def _read_rows(path, header: Sequence[str]):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [c.strip().lower() for c in first] != list(header):
            raise DataError(f"{path}: expected header {','.join(header)!r}, got {','.join(first)!r}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            yield reader.line_num, row


def _check_order(path, lineno, prev, cur):
    if prev is None:
        return
    if cur == prev:
        raise DataError(f"{path}:{lineno}: duplicate timestamp {cur}")
    if cur < prev:
        raise DataError(f"{path}:{lineno}: timestamps not ascending ({cur} after {prev})")


def load_ohlc_csv(path, resolution: str = "daily") -> list[OhlcBar]:
    """Read an OHLC CSV into bars, validating each row.

    Errors are raised as :class:`DataError` carrying ``path:line``.
    """
    if resolution not in RESOLUTIONS:
        raise DataError(f"unknown resolution {resolution!r}")
    bars: list[OhlcBar] = []
    prev = None
    for lineno, row in _read_rows(path, OHLC_HEADER):
        if len(row) != len(OHLC_HEADER):
            raise DataError(f"{path}:{lineno}: expected {len(OHLC_HEADER)} fields, got {len(row)}")
        try:
            ts = _parse_date(row[0], resolution)
            o, h, l, c, v = (float(x) for x in row[1:])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
        if h < l:
            raise DataError(f"{path}:{lineno}: high {h} < low {l}")
        try:
            bar = OhlcBar(ts, o, h, l, c, v)
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        _check_order(path, lineno, prev, ts)
        prev = ts
        bars.append(bar)
    return bars


def load_macro_csv(path) -> list[MacroRecord]:
    records: list[MacroRecord] = []
    prev = None
    for lineno, row in _read_rows(path, MACRO_HEADER):
        if len(row) != len(MACRO_HEADER):
            raise DataError(f"{path}:{lineno}: expected {len(MACRO_HEADER)} fields, got {len(row)}")
        try:
            period = dt.datetime.strptime(row[0].strip(), "%Y-%m").date()
            vals = [float(x) for x in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataError(f"{path}:{lineno}: non-finite indicator value")
        _check_order(path, lineno, prev, period)
        prev = period
        records.append(MacroRecord(period, *vals))
    return records


def load_aux_csv(path, name: str | None = None) -> NamedSeries:
    dates, values = [], []
    prev = None
    for lineno, row in _read_rows(path, AUX_HEADER):
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
        try:
            d = dt.date.fromisoformat(row[0].strip())
            v = float(row[1])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed row ({exc})") from None
        if not math.isfinite(v):
            raise DataError(f"{path}:{lineno}: non-finite value")
        _check_order(path, lineno, prev, d)
        prev = d
        dates.append(d)
        values.append(v)
    return NamedSeries(name or Path(path).stem, tuple(dates), tuple(values))


def _add_months(d: dt.date, months: int) -> dt.date:
    m = d.month - 1 + months
    return dt.date(d.year + m // 12, m % 12 + 1, 1)


def macro_to_series(records: Sequence[MacroRecord], publication_lag_months: int = 1) -> list[NamedSeries]:
    """Split macro records into one series per indicator.

    A period's value is treated as published on the first day of the month
    ``publication_lag_months`` after the period, so daily rows never see a
    month's figure before that month is over.
    """
    dates = tuple(_add_months(r.period, publication_lag_months) for r in records)
    attrs = ("gdp", "cpi", "ppi", "unemployment_rate", "inflation_rate")
    return [
        NamedSeries(name, dates, tuple(getattr(r, attr) for r in records))
        for name, attr in zip(MACRO_FIELDS, attrs)
    ]


def resample_monthly(bars: Sequence[OhlcBar]) -> list[OhlcBar]:
    """Aggregate daily bars into calendar-month bars dated on the 1st."""
    out: list[OhlcBar] = []
    group: list[OhlcBar] = []

    def flush():
        out.append(OhlcBar(
            timestamp=group[0].timestamp.replace(day=1),
            open=group[0].open,
            high=max(b.high for b in group),
            low=min(b.low for b in group),
            close=group[-1].close,
            volume=sum(b.volume for b in group),
        ))

    for bar in bars:
        if group and (bar.timestamp.year, bar.timestamp.month) != (group[0].timestamp.year, group[0].timestamp.month):
            flush()
            group = []
        group.append(bar)
    if group:
        flush()
    return out


def forward_fill(series: NamedSeries, dates: Sequence[dt.date]) -> np.ndarray:
    """Value of ``series`` most recently published at or before each date."""
    src = np.array([d.toordinal() for d in series.dates])
    qry = np.array([d.toordinal() for d in dates])
    if len(src) == 0 or (len(qry) and qry[0] < src[0]):
        raise DataError(
            f"aux series {series.name!r} starts after the first bar; forward-fill cannot cover {dates[0]}"
        )
    idx = np.searchsorted(src, qry, side="right") - 1
    return np.asarray(series.values, dtype=float)[idx]


def feature_rows(bars: Sequence[OhlcBar], aux: Iterable[NamedSeries] = ()) -> tuple[list[str], np.ndarray]:
    """Feature matrix for every bar: ``[high, low, close, volume, aux...]``."""
    aux = list(aux)
    dates = [b.timestamp for b in bars]
    cols = [
        np.array([b.high for b in bars], dtype=float),
        np.array([b.low for b in bars], dtype=float),
        np.array([b.close for b in bars], dtype=float),
        np.array([b.volume for b in bars], dtype=float),
    ]
    names = ["high", "low", "close", "volume"]
    for s in aux:
        cols.append(forward_fill(s, dates))
        names.append(s.name)
    return names, np.column_stack(cols) if bars else np.empty((0, len(names)))


def align_features(bars: Sequence[OhlcBar], aux: Iterable[NamedSeries] = ()) -> FeatureSet:
    """Align bars with auxiliary series and attach next-period targets.

    The last bar is kept in ``features`` for inference but has no target, so
    ``n_rows == len(bars) - 1``.
    """
    if len(bars) < 2:
        raise DataError("need at least 2 bars to build next-period targets")
    names, feats = feature_rows(bars, aux)
    targets = feats[1:, :3].copy()
    return FeatureSet(
        dates=[b.timestamp for b in bars],
        columns=names,
        features=feats,
        targets=targets,
        target_dates=[b.timestamp for b in bars[1:]],
    )


def standardize(values, name: str = "") -> StandardizedSeries:
    """Z-score with the population standard deviation."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise DataError("standardize needs a vector of length >= 2")
    mu = float(np.mean(x))
    sigma = float(np.std(x))
    if not sigma > 0 or sigma <= 1e-12 * max(1.0, abs(mu)):
        raise DataError(f"degenerate series {name!r}: standard deviation is zero")
    return StandardizedSeries((x - mu) / sigma, mu, sigma, name)


def destandardize(series: StandardizedSeries, z=None) -> np.ndarray:
    return series.destandardize(z)


@dataclass
class Scaler:
    """Per-column (mean, std) pairs fitted on a row subset."""

    mean: np.ndarray
    std: np.ndarray
    columns: list[str] = field(default_factory=list)

    @classmethod
    def fit(cls, matrix: np.ndarray, columns: Sequence[str] = (), allow_constant: bool = False) -> "Scaler":
        """Fit every column; constant columns raise unless ``allow_constant``.

        With ``allow_constant`` a constant column keeps its mean and gets
        ``std = 1``, so it standardizes to zeros.
        """
        matrix = np.asarray(matrix, dtype=float)
        names = list(columns) or [f"col{i}" for i in range(matrix.shape[1])]
        means, stds = [], []
        for j in range(matrix.shape[1]):
            try:
                f = standardize(matrix[:, j], names[j])
                means.append(f.mean)
                stds.append(f.std)
            except DataError:
                if not allow_constant or len(matrix) < 1:
                    raise
                logger.warning("column %r is constant over the fitting rows; scaling it by 1", names[j])
                means.append(float(np.mean(matrix[:, j])))
                stds.append(1.0)
        return cls(np.array(means), np.array(stds), names)

    def transform(self, matrix, cols=None):
        cols = slice(None) if cols is None else cols
        return (np.asarray(matrix, dtype=float) - self.mean[cols]) / self.std[cols]

    def inverse(self, z, cols=None):
        cols = slice(None) if cols is None else cols
        return np.asarray(z, dtype=float) * self.std[cols] + self.mean[cols]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_splits(n_samples: int, k: int = 4, test_frac: float = 0.10, window_len: int = 1,
                min_test: int | None = None) -> DatasetSplit:
    """Chronological k-fold split with a held-out final test block.

    The last ``round(n * test_frac)`` samples form the test block (at least
    ``min_test`` when given); the rest is cut into ``k`` contiguous folds whose
    sizes differ by at most one, larger folds first.
    """
    if k < 2:
        raise DataError("k must be >= 2")
    if not 0 < test_frac < 0.5:
        raise DataError("test_frac must lie in (0, 0.5)")
    n_test = max(1, _round_half_up(n_samples * test_frac))
    if min_test is not None:
        n_test = max(n_test, min_test)
    n_rest = n_samples - n_test
    if n_rest < k:
        raise DataError(f"{n_samples} samples leave {max(n_rest, 0)} for {k} folds; every fold must be nonempty")
    base, extra = divmod(n_rest, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.arange(start, start + size))
        start += size
    return DatasetSplit(folds, np.arange(n_rest, n_samples), window_len)


def write_ohlc_csv(bars: Sequence[OhlcBar], path, monthly: bool = False) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OHLC_HEADER)
        for b in bars:
            d = b.timestamp.strftime("%Y-%m") if monthly else b.timestamp.isoformat()
            w.writerow([d, repr(b.open), repr(b.high), repr(b.low), repr(b.close), repr(b.volume)])


def write_aux_csv(series: NamedSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUX_HEADER)
        for d, v in zip(series.dates, series.values):
            w.writerow([d.isoformat(), repr(v)])


def write_macro_csv(records: Sequence[MacroRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MACRO_HEADER)
        for r in records:
            w.writerow([r.period.strftime("%Y-%m"), repr(r.gdp), repr(r.cpi), repr(r.ppi),
                        repr(r.unemployment_rate), repr(r.inflation_rate)])
