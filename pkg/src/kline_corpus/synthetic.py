"""Seeded random-walk OHLCV generator for fixtures and demos."""

from __future__ import annotations

import datetime as dt
from decimal import Decimal

import numpy as np

from .market_data import PRICE_QUANTUM, OhlcvBar


def _price(x: float) -> Decimal:
    return Decimal(repr(max(x, 0.01))).quantize(PRICE_QUANTUM)


def random_walk_bars(
    n: int,
    seed: int,
    start_price: float = 20.0,
    start_date: dt.date = dt.date(2006, 1, 4),
    drift: float = 0.0,
    vol: float = 0.02,
) -> list[OhlcvBar]:
    """``n`` valid bars on consecutive weekdays following a log-normal walk."""
    rng = np.random.default_rng(seed)
    bars = []
    close = start_price
    day = start_date
    for _ in range(n):
        while day.weekday() >= 5:
            day += dt.timedelta(days=1)
        open_ = close * float(np.exp(rng.normal(0.0, vol / 3)))
        close = open_ * float(np.exp(drift + rng.normal(0.0, vol)))
        o, c = _price(open_), _price(close)
        hi = _price(float(max(o, c)) * (1 + abs(rng.normal(0.0, vol / 2))))
        lo = _price(float(min(o, c)) * (1 - abs(rng.normal(0.0, vol / 2))))
        hi, lo = max(hi, o, c), min(lo, o, c)
        volume = int(rng.integers(2_000_000, 40_000_000))
        bars.append(OhlcvBar(day, o, hi, lo, c, volume))
        close = float(c)
        day += dt.timedelta(days=1)
    return bars


def synthetic_universe(tickers: list[str], n: int, seed: int) -> list[tuple[str, OhlcvBar]]:
    """Interleaved ``(ticker, bar)`` rows for several symbols, ordered by date."""
    rows = []
    for i, ticker in enumerate(tickers):
        drift = (i % 3 - 1) * 0.001
        bars = random_walk_bars(n, seed * 1000 + i, start_price=10.0 + 7 * i, drift=drift)
        rows.extend((ticker, b) for b in bars)
    rows.sort(key=lambda r: (r[1].date, r[0]))
    return rows
