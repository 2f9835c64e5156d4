"""Pending-order strategy driven by next-day (high, low, close) forecasts.

One order per day, placed before the session and closed by its end: the
predicted close picks the direction, the predicted low/high give entry and
take-profit, and the stop sits a third of the take-profit distance on the
other side of the entry. Lots are sized so the stop risks a fixed fraction
of free margin. No spread, commission or slippage is modelled.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path

from .data import OhlcBar
from .errors import DataError

OUNCES_PER_LOT = 100.0
LONG_KINDS = ("buy_limit", "buy_stop")
SHORT_KINDS = ("sell_limit", "sell_stop")
EXIT_REASONS = ("tp", "sl", "expiry")
_EPS = 1e-9


@dataclass(frozen=True)
class TradingParams:
    risk_fraction: float = 0.05
    leverage: float = 100.0
    tick: float = 0.01
    lot_step: float = 0.01
    min_lot: float = 0.01
    reward_risk: float = 3.0

    def __post_init__(self):
        if not 0 < self.risk_fraction <= 1:
            raise ValueError("risk_fraction must be in (0, 1]")
        for name in ("leverage", "tick", "lot_step", "min_lot", "reward_risk"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _ticks(x: float, tick: float) -> float:
    return x / tick


def round_tick(x: float, tick: float = 0.01) -> float:
    return round(round(_ticks(x, tick)) * tick, 10)


def floor_tick(x: float, tick: float = 0.01) -> float:
    return round(math.floor(_ticks(x, tick) + _EPS) * tick, 10)


def ceil_tick(x: float, tick: float = 0.01) -> float:
    return round(math.ceil(_ticks(x, tick) - _EPS) * tick, 10)


@dataclass(frozen=True)
class PendingOrder:
    kind: str
    entry: float
    take_profit: float
    stop_loss: float
    lot: float
    placed_at: dt.date | None = None
    expires_at: dt.date | None = None

    def __post_init__(self):
        if self.kind in LONG_KINDS:
            ok = self.stop_loss < self.entry < self.take_profit
        elif self.kind in SHORT_KINDS:
            ok = self.take_profit < self.entry < self.stop_loss
        else:
            raise ValueError(f"unknown order kind {self.kind!r}")
        if not ok:
            raise ValueError(f"{self.kind}: prices violate stop < entry < target ordering")
        if self.lot <= 0:
            raise ValueError("lot must be positive")

    @property
    def direction(self) -> int:
        return 1 if self.kind in LONG_KINDS else -1

    @property
    def risk_distance(self) -> float:
        return abs(self.entry - self.stop_loss)

    @property
    def reward_distance(self) -> float:
        return abs(self.take_profit - self.entry)


@dataclass
class Account:
    """Cash account; the balance is held in integer cents so P/L sums exactly."""

    balance_cents: int = 100_000
    leverage: float = 100.0
    open_positions: list = field(default_factory=list)

    @classmethod
    def from_balance(cls, usd: float, leverage: float = 100.0) -> "Account":
        return cls(to_cents(usd), leverage)

    @property
    def balance(self) -> float:
        return self.balance_cents / 100

    def used_margin(self) -> float:
        return sum(required_margin(o.entry, o.lot, self.leverage) for o in self.open_positions)

    def unrealized(self, price: float) -> float:
        return sum(o.direction * (price - o.entry) * OUNCES_PER_LOT * o.lot for o in self.open_positions)

    def equity(self, price: float | None = None) -> float:
        return self.balance if price is None else self.balance + self.unrealized(price)

    def free_margin(self, price: float | None = None) -> float:
        return self.equity(price) - self.used_margin()


def to_cents(usd: float) -> int:
    return int(round(usd * 100))


@dataclass
class TradeRecord:
    date: dt.date
    order: PendingOrder
    filled: bool
    exit_price: float | None
    pnl_cents: int
    reason: str  # tp, sl or expiry
    free_margin_at_placement: float = math.nan

    @property
    def pnl(self) -> float:
        return self.pnl_cents / 100


@dataclass
class TradeLog:
    initial_balance: float
    trades: list[TradeRecord] = field(default_factory=list)
    equity: list[tuple[dt.date, float]] = field(default_factory=list)

    @property
    def final_balance(self) -> float:
        return self.equity[-1][1] if self.equity else self.initial_balance

    @property
    def total_pnl_cents(self) -> int:
        return sum(t.pnl_cents for t in self.trades)

    @property
    def total_pnl(self) -> float:
        return self.total_pnl_cents / 100


def required_margin(entry: float, lot: float, leverage: float = 100.0) -> float:
    return entry * OUNCES_PER_LOT * lot / leverage


def compute_lot(free_margin: float, entry: float, stop_loss: float, params: TradingParams | None = None) -> float:
    """Risk-sized lot, floored to the lot step and capped by available margin.

    Returns 0.0 when the result is below the minimum lot.
    """
    p = params or TradingParams()
    if not free_margin > 0:
        raise ValueError("free margin must be positive")
    dist = abs(entry - stop_loss)
    if dist == 0:
        raise ValueError("entry equals stop loss")
    risk_lot = p.risk_fraction * free_margin / (dist * OUNCES_PER_LOT)
    cap_lot = free_margin * p.leverage / (entry * OUNCES_PER_LOT)
    steps = math.floor(min(risk_lot, cap_lot) / p.lot_step + _EPS)
    lot = round(steps * p.lot_step, 10)
    return lot if lot >= p.min_lot - _EPS else 0.0


def make_order(forecast, current_close: float, free_margin: float, params: TradingParams | None = None,
               placed_at: dt.date | None = None) -> PendingOrder | None:
    """Pending order for the forecast day, or ``None`` for no trade.

    ``forecast`` needs ``high``, ``low`` and ``close`` attributes. Entry and
    target are rounded to the tick inward (toward each other) so a forecast
    that exactly matches the realized bar still fills and reaches target.
    """
    p = params or TradingParams()
    if not forecast.high > forecast.low:
        raise ValueError(f"degenerate forecast: high {forecast.high} <= low {forecast.low}")
    if forecast.close > current_close:
        entry, tp = ceil_tick(forecast.low, p.tick), floor_tick(forecast.high, p.tick)
        kind = "buy_limit" if entry < current_close else "buy_stop"
        sign = 1
    elif forecast.close < current_close:
        entry, tp = floor_tick(forecast.high, p.tick), ceil_tick(forecast.low, p.tick)
        kind = "sell_limit" if entry > current_close else "sell_stop"
        sign = -1
    else:
        return None
    reward = sign * (tp - entry)
    sl_dist = round_tick(reward / p.reward_risk, p.tick)
    if reward <= 0 or sl_dist <= 0:
        return None
    sl = round(entry - sign * sl_dist, 10)
    lot = compute_lot(free_margin, entry, sl, p)
    if lot == 0:
        return None
    return PendingOrder(kind, entry, tp, sl, lot, placed_at, placed_at)


def fills(order: PendingOrder, bar: OhlcBar) -> bool:
    if order.kind in ("buy_limit", "sell_stop"):
        return bar.low <= order.entry
    return bar.high >= order.entry


def simulate_day(order: PendingOrder, bar: OhlcBar, account: Account) -> TradeRecord:
    """Resolve one order against the realized bar and book its P/L.

    P/L is settled to the cent. A filled order exits at its stop if the bar reaches it (checked first),
    else at its target, else at the bar's close.
    """
    fm = account.free_margin()
    if not fills(order, bar):
        return TradeRecord(bar.timestamp, order, False, None, 0, "expiry", fm)
    account.open_positions.append(order)
    if bar.low <= order.stop_loss <= bar.high:
        exit_price, reason = order.stop_loss, "sl"
    elif bar.low <= order.take_profit <= bar.high:
        exit_price, reason = order.take_profit, "tp"
    else:
        exit_price, reason = bar.close, "expiry"
    pnl = to_cents(order.direction * (exit_price - order.entry) * OUNCES_PER_LOT * order.lot)
    account.open_positions.remove(order)
    account.balance_cents += pnl
    return TradeRecord(bar.timestamp, order, True, exit_price, pnl, reason, fm)


def run_backtest(forecasts, bars: list[OhlcBar], initial_balance: float = 1000.0,
                 params: TradingParams | None = None) -> TradeLog:
    """Trade each forecast against its day's bar; the previous bar gives the current close.

    ``forecasts`` is a sequence of objects with ``date``, ``high``, ``low``
    and ``close``. Every forecast date must match a bar that has a
    predecessor.
    """
    p = params or TradingParams()
    index = {b.timestamp: i for i, b in enumerate(bars)}
    account = Account.from_balance(initial_balance, p.leverage)
    log = TradeLog(initial_balance)
    last = None
    for f in forecasts:
        i = index.get(f.date)
        if i is None:
            raise DataError(f"forecast date {f.date} has no matching bar")
        if i == 0:
            raise DataError(f"forecast date {f.date} has no previous bar for the current close")
        if last is not None and f.date <= last:
            raise DataError(f"forecast dates not strictly increasing at {f.date}")
        last = f.date
        order = make_order(f, bars[i - 1].close, account.free_margin(), p, bars[i].timestamp)
        if order is not None:
            log.trades.append(simulate_day(order, bars[i], account))
        log.equity.append((f.date, account.equity()))
    return log


# ----------------------------------------------------------------------------
# CSV I/O

FORECAST_HEADER = ["date", "pred_high", "pred_low", "pred_close"]
TRADE_HEADER = ["date", "kind", "entry", "exit", "lot", "pnl", "reason"]
EQUITY_HEADER = ["date", "equity"]


@dataclass(frozen=True)
class DatedForecast:
    date: dt.date
    high: float
    low: float
    close: float


def write_forecast_csv(forecasts, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORECAST_HEADER)
        for f in forecasts:
            w.writerow([f.date.isoformat(), repr(float(f.high)), repr(float(f.low)), repr(float(f.close))])


def read_forecast_csv(path) -> list[DatedForecast]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"forecast file not found: {path}")
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != FORECAST_HEADER:
            raise DataError(f"{path}: expected header {','.join(FORECAST_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                d, hi, lo, cl = row
                out.append(DatedForecast(dt.date.fromisoformat(d), float(hi), float(lo), float(cl)))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def _money(x: float) -> str:
    return f"{x:.2f}"


def write_trades_csv(log: TradeLog, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRADE_HEADER)
        for t in log.trades:
            w.writerow([t.date.isoformat(), t.order.kind, f"{t.order.entry:.2f}",
                        "" if t.exit_price is None else f"{t.exit_price:.2f}",
                        f"{t.order.lot:.2f}", _money(t.pnl), t.reason])


def write_equity_csv(log: TradeLog, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EQUITY_HEADER)
        for d, e in log.equity:
            w.writerow([d.isoformat(), _money(e)])
