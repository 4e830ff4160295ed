"""Ingest, validate and anonymize per-symbol daily OHLCV history.

Input is comma-separated text with a header row and the column order
``symbol,date,open,high,low,close,volume``. Prices are kept as
:class:`~decimal.Decimal` quantized to four fractional digits so that the
textual serialization used in prompts round-trips exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import logging
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable

from .errors import EmptySeries, FileUnreadable, MalformedRow, RejectionRateExceeded

logger = logging.getLogger(__name__)

PRICE_QUANTUM = Decimal("0.0001")
DEFAULT_SALT = "kline-corpus"
COLUMNS = ("symbol", "date", "open", "high", "low", "close", "volume")


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: Decimal
    high: Decimal
    low: Decimal
    close: Decimal
    volume: int

    def check(self) -> None:
        """Raise ``ValueError`` if the bar breaks an OHLC invariant."""
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValueError("prices must be positive")
        if self.volume < 0:
            raise ValueError("volume must be non-negative")
        if self.low > self.high:
            raise ValueError("OHLC invariant: low > high")
        if self.high < max(self.open, self.close):
            raise ValueError("OHLC invariant: high < max(open, close)")
        if self.low > min(self.open, self.close):
            raise ValueError("OHLC invariant: low > min(open, close)")


@dataclass(frozen=True)
class Series:
    symbol_id: str
    bars: tuple[OhlcvBar, ...]

    def __post_init__(self):
        if not self.bars:
            raise EmptySeries(f"series {self.symbol_id!r} has no bars")
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError(f"series {self.symbol_id!r}: dates not strictly increasing at {cur.date}")

    def __len__(self) -> int:
        return len(self.bars)

    def closes(self) -> list[Decimal]:
        return [b.close for b in self.bars]


@dataclass(frozen=True)
class IngestFormat:
    """How to read an ingest file and anonymize its tickers."""

    delimiter: str = ","
    columns: tuple[str, ...] = COLUMNS
    max_reject_rate: float = 0.10
    salt: str = DEFAULT_SALT
    encoding: str = "utf-8-sig"


@dataclass
class LoadReport:
    rows: int = 0
    rejected: list[MalformedRow] = field(default_factory=list)
    ticker_map: dict[str, str] = field(default_factory=dict)


def parse_price(text: str) -> Decimal:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"not a number: {text!r}") from None
    if not value.is_finite():
        raise ValueError(f"not a finite number: {text!r}")
    return value.quantize(PRICE_QUANTUM)


def parse_volume(text: str) -> int:
    text = text.strip()
    if not text.isdigit():
        raise ValueError(f"volume must be a non-negative integer: {text!r}")
    return int(text)


def parse_bar(fields: dict[str, str]) -> OhlcvBar:
    try:
        date = dt.date.fromisoformat(fields["date"].strip())
    except ValueError:
        raise ValueError(f"bad date: {fields['date']!r}") from None
    bar = OhlcvBar(
        date=date,
        open=parse_price(fields["open"]),
        high=parse_price(fields["high"]),
        low=parse_price(fields["low"]),
        close=parse_price(fields["close"]),
        volume=parse_volume(fields["volume"]),
    )
    bar.check()
    return bar


def opaque_id(ticker: str, salt: str = DEFAULT_SALT) -> str:
    """Stable opaque identifier for a raw ticker."""
    digest = hashlib.sha256(f"{salt}\x00{ticker}".encode()).hexdigest()
    # leading letter keeps ids from ever looking like a numeric code
    return "sym_" + digest[:12]


def anonymize(series: Series, salt: str = DEFAULT_SALT) -> Series:
    """Return ``series`` with its raw ticker replaced by an opaque id."""
    return replace(series, symbol_id=opaque_id(series.symbol_id, salt))


def load_series(
    path: str | Path,
    fmt: IngestFormat | None = None,
    *,
    strict: bool = False,
    report: LoadReport | None = None,
    map_path: str | Path | None = None,
) -> list[Series]:
    """Load every symbol in ``path`` as an anonymized, date-sorted Series.

    Invalid rows are skipped and logged; pass ``strict=True`` to raise the
    first :class:`MalformedRow` instead. Skipped rows are appended to
    ``report.rejected`` when a report is given. If more than
    ``fmt.max_reject_rate`` of the rows are rejected the whole file is
    refused, since that points at a format mismatch rather than dirty data.

    The raw tickers survive only in the sidecar ``map_path`` file
    (``ticker,symbol_id`` rows), if one is requested.
    """
    fmt = fmt or IngestFormat()
    report = report if report is not None else LoadReport()
    try:
        with open(path, encoding=fmt.encoding, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=fmt.delimiter))
    except OSError as exc:
        raise FileUnreadable(f"{path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise FileUnreadable(f"{path}: not valid text ({exc})") from exc

    if not rows:
        raise EmptySeries(f"{path}: file is empty")
    header = [h.strip().lower() for h in rows[0]]
    if tuple(header) != tuple(fmt.columns):
        raise MalformedRow(1, f"header must be {','.join(fmt.columns)}, got {','.join(header)}")

    grouped: dict[str, dict[dt.date, OhlcvBar]] = {}
    for line_no, row in enumerate(rows[1:], start=2):
        if not any(cell.strip() for cell in row):
            continue
        report.rows += 1
        try:
            if len(row) != len(fmt.columns):
                raise ValueError(f"expected {len(fmt.columns)} fields, got {len(row)}")
            fields = dict(zip(fmt.columns, row))
            ticker = fields["symbol"].strip()
            if not ticker:
                raise ValueError("empty symbol")
            bar = parse_bar(fields)
            bars = grouped.setdefault(ticker, {})
            if bar.date in bars:
                raise ValueError(f"duplicate date {bar.date} for symbol")
            bars[bar.date] = bar
        except ValueError as exc:
            err = MalformedRow(line_no, str(exc))
            if strict:
                raise err from exc
            logger.warning("%s: skipping %s", path, err)
            report.rejected.append(err)

    if report.rows and len(report.rejected) / report.rows > fmt.max_reject_rate:
        raise RejectionRateExceeded(
            f"{path}: rejected {len(report.rejected)} of {report.rows} rows "
            f"(limit {fmt.max_reject_rate:.0%})"
        )
    if not grouped:
        raise EmptySeries(f"{path}: no valid rows")

    out = []
    for ticker, bars in grouped.items():
        raw = Series(ticker, tuple(bars[d] for d in sorted(bars)))
        series = anonymize(raw, fmt.salt)
        report.ticker_map[ticker] = series.symbol_id
        out.append(series)
    if map_path is not None:
        write_symbol_map(report.ticker_map, map_path)
    return out


def write_symbol_map(mapping: dict[str, str], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticker", "symbol_id"])
        for ticker in sorted(mapping):
            writer.writerow([ticker, mapping[ticker]])


def write_series_csv(rows: Iterable[tuple[str, OhlcvBar]], path: str | Path) -> None:
    """Write ``(ticker, bar)`` pairs in the ingest format. Used by fixtures and demos."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for ticker, b in rows:
            writer.writerow([ticker, b.date.isoformat(), b.open, b.high, b.low, b.close, b.volume])
