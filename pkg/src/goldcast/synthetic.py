"""Synthetic market fixtures for tests, demos and the desk-scale check."""

from __future__ import annotations

import datetime as dt
import math
from pathlib import Path

import numpy as np

from .data import (
    MacroRecord,
    NamedSeries,
    OhlcBar,
    macro_to_series,
    resample_monthly,
    write_aux_csv,
    write_macro_csv,
    write_ohlc_csv,
)
from .pipeline import MarketData


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def bars_from_closes(dates, closes, rng: np.random.Generator, wick: float = 1.5) -> list[OhlcBar]:
    """OHLC bars whose open is the previous close and wicks are half-normal."""
    bars = []
    prev = closes[0]
    for d, c in zip(dates, closes):
        o = prev
        hi = max(o, c) + abs(rng.normal(0, wick))
        lo = min(o, c) - abs(rng.normal(0, wick))
        vol = float(np.round(rng.lognormal(12, 0.3)))
        bars.append(OhlcBar(d, float(o), float(hi), float(lo), float(c), vol))
        prev = c
    return bars


def sine_trend_closes(n: int, rng: np.random.Generator, base=1500.0, slope=0.5, amp=20.0,
                      period=30.0, noise=2.0) -> np.ndarray:
    t = np.arange(n)
    return base + slope * t + amp * np.sin(2 * math.pi * t / period) + rng.normal(0, noise, n)


def random_walk(n: int, rng: np.random.Generator, start: float, step: float) -> np.ndarray:
    return start + np.cumsum(rng.normal(0, step, n))


def synthetic_market(n_days: int = 1200, seed: int = 0, start: dt.date = dt.date(2010, 1, 4),
                     with_aux: bool = True) -> tuple[MarketData, list[MacroRecord]]:
    """Sine-plus-trend gold series with derived monthly bars.

    Daily aux series (oil, dow, dollar index) are random walks; the macro
    records are smooth monthly indicators beginning before the first bar.
    """
    rng = np.random.default_rng(seed)
    dates = business_days(start, n_days)
    daily = bars_from_closes(dates, sine_trend_closes(n_days, rng), rng)
    monthly = resample_monthly(daily)
    daily_aux, monthly_aux, macro = [], [], []
    if with_aux:
        for name, s0, step in (("oil", 80.0, 1.0), ("dow", 11000.0, 80.0), ("usd_index", 80.0, 0.3)):
            daily_aux.append(NamedSeries(name, tuple(dates), tuple(map(float, random_walk(n_days, rng, s0, step)))))
        first = monthly[0].timestamp
        m0 = dt.date(first.year - 1, 11, 1) if first.month == 1 else dt.date(first.year, first.month - 2, 1)
        n_months = len(monthly) + 2
        periods = []
        y, m = m0.year, m0.month
        for _ in range(n_months):
            periods.append(dt.date(y, m, 1))
            y, m = (y + 1, 1) if m == 12 else (y, m + 1)
        k = np.arange(n_months)
        gdp = 15000 + 40 * k + rng.normal(0, 20, n_months)
        cpi = 218 + 0.2 * k + rng.normal(0, 0.1, n_months)
        ppi = 180 + 0.3 * k + rng.normal(0, 0.5, n_months)
        unemp = 9.5 - 0.05 * k + rng.normal(0, 0.1, n_months)
        infl = 2 + 0.5 * np.sin(k / 6) + rng.normal(0, 0.1, n_months)
        macro = [MacroRecord(p, *map(float, vals)) for p, *vals in zip(periods, gdp, cpi, ppi, unemp, infl)]
        monthly_aux = macro_to_series(macro)
    return MarketData(daily, monthly, daily_aux, monthly_aux), macro


def write_fixture(out_dir, n_days: int = 1200, seed: int = 0) -> dict[str, Path]:
    """Write a complete synthetic dataset as CSVs; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, macro = synthetic_market(n_days, seed)
    paths = {"daily": out / "gold_daily.csv", "monthly": out / "gold_monthly.csv", "macro": out / "macro.csv"}
    write_ohlc_csv(data.daily_bars, paths["daily"])
    write_ohlc_csv(data.monthly_bars, paths["monthly"], monthly=True)
    write_macro_csv(macro, paths["macro"])
    for s in data.daily_aux:
        paths[s.name] = out / f"{s.name}.csv"
        write_aux_csv(s, paths[s.name])
    return paths
