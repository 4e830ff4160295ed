"""Pinned renderer inputs built from integer arithmetic only."""

import datetime as dt
from decimal import Decimal

from kline_corpus.market_data import OhlcvBar
from kline_corpus.sampling import ChartSpec


def lcg_bars(n, seed, start_cents=2000):
    x = seed
    cents = start_cents
    day = dt.date(2015, 3, 2)
    bars = []

    def nxt():
        nonlocal x
        x = (1103515245 * x + 12345) % 2**31
        return x

    for _ in range(n):
        while day.weekday() >= 5:
            day += dt.timedelta(days=1)
        o = cents + nxt() % 41 - 20
        c = o + nxt() % 81 - 40
        h = max(o, c) + nxt() % 25
        lo = min(o, c) - nxt() % 25
        vol = 1_000_000 + nxt() % 9_000_000
        d = lambda v: Decimal(v) / 100
        bars.append(OhlcvBar(day, d(o).quantize(Decimal("0.0001")), d(h).quantize(Decimal("0.0001")),
                             d(lo).quantize(Decimal("0.0001")), d(c).quantize(Decimal("0.0001")), vol))
        cents = c
        day += dt.timedelta(days=1)
    return bars


GOLDEN = [
    ("candle-light-full", 60, 1, ChartSpec("candlestick", "light", (3, 6, 9), True, 640, 480, 1)),
    ("line-dark-bare", 48, 2, ChartSpec("line", "dark", (), False, 640, 480, 2)),
    ("candle-contrast-ma3", 36, 3, ChartSpec("candlestick", "high-contrast", (3,), False, 640, 480, 3)),
    ("line-muted-ma69-vol", 64, 4, ChartSpec("line", "muted", (6, 9), True, 640, 480, 4)),
    ("candle-print-800", 45, 5, ChartSpec("candlestick", "print", (9,), True, 800, 600, 5)),
]

# pinned after visual inspection of each render
GOLDEN_PNG_SHA256 = {
    "candle-light-full": "655435c4d457f338782e203addecff34be60a40dbde7f9eee6d744cf57d544b3",
    "line-dark-bare": "9566a62b1a4eccfa610c096c64dcc79f9cac94c295eaa9776e9b5654eba08de7",
    "candle-contrast-ma3": "ff632795b017804e255686bc4a8161af6c5b4eeb0b07233bfb518a83bd9bd1f6",
    "line-muted-ma69-vol": "c91b66c8eede0e825607fdfd6878af7c3698d38f4297df93e7733d08094092ca",
    "candle-print-800": "06c683880ddacbdd4f9912b0697ef8cc6de20cfb9cc2c8f618094e2b33e6306c",
}
# decoded RGB pixels; independent of the zlib build used by the PNG encoder
GOLDEN_PIXEL_SHA256 = {
    "candle-light-full": "47e1bd4d22bf7508c48425a87afeba9b72e3e1d3a5c96a39f601dee720b38318",
    "line-dark-bare": "6f6e9549a0e2a801dcd99e0f000ceb4384dce393202fa4a5832e5f9a2877f001",
    "candle-contrast-ma3": "7bb27cfa51b364961df0fd241a2ce919eb726787259e30e11cfc13bc1a29dcf1",
    "line-muted-ma69-vol": "b3b322f45784d870d16a67619d115bc2a2fc78a003e4c0fe27a7661a63856d30",
    "candle-print-800": "2c1af490a36c81126990e9737a53562accdb526a8ebbf2a734bc2d543d6a51d8",
}
