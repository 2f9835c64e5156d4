import datetime as dt

import numpy as np
import pytest

from goldcast.data import OhlcBar
from goldcast.synthetic import business_days


def make_bars(closes, start=dt.date(2020, 1, 1), wick=1.0, grid=True):
    """Bars with open = previous close and fixed wicks; prices snapped to cents when ``grid``."""
    dates = business_days(start, len(closes))
    bars, prev = [], float(closes[0])
    for d, c in zip(dates, closes):
        c = float(c)
        hi, lo = max(prev, c) + wick, min(prev, c) - wick
        if grid:
            prev, c, hi, lo = (round(v, 2) for v in (prev, c, hi, lo))
        bars.append(OhlcBar(d, prev, hi, lo, c, 1000.0))
        prev = c
    return bars


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


SMALL_RUN = {
    "daily_window": 10,
    "monthly_window": 3,
    "max_epochs": 5,
    "learning_rate": 0.01,
    "search_epochs": 1,
    "gwo_herd_size": 3,
    "gwo_iterations": 1,
    "gwo_lower_bound": 2,
    "gwo_upper_bound": 4,
}


def small_run_dir(root, days=420, seed=0, **overrides):
    """Synthetic dataset plus a fast config; returns the config path."""
    from goldcast.cli import cmd_synth
    from goldcast.config import load_config, render_config

    data = root / "data"
    cmd_synth(data, days, seed)
    values = dict(load_config(data / "config.txt").values)
    values.update(SMALL_RUN)
    values.update(overrides)
    return write_text(data / "small.txt", render_config(values))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
