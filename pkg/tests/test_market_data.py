import csv
import datetime as dt
import re
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kline_corpus.errors import EmptySeries, FileUnreadable, MalformedRow, RejectionRateExceeded
from kline_corpus.market_data import (
    IngestFormat,
    LoadReport,
    Series,
    anonymize,
    load_series,
    opaque_id,
)
from kline_corpus.prompting import build_pretrain_request

HEADER = "symbol,date,open,high,low,close,volume\n"


def write(tmp_path, body, name="in.csv"):
    path = tmp_path / name
    path.write_text(HEADER + body)
    return path


def test_three_rows_one_series_sorted(tmp_path):
    path = write(
        tmp_path,
        "600000,2020-01-06,10,11,9,10.5,100\n"
        "600000,2020-01-02,10,11,9,10.5,100\n"
        "600000,2020-01-03,10,11,9,10.5,100\n",
    )
    [s] = load_series(path)
    assert [b.date for b in s.bars] == [dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6)]
    assert s.symbol_id != "600000"


def test_high_below_open_is_malformed(tmp_path):
    path = write(tmp_path, "600000,2020-01-02,10,9.5,9,9.2,100\n")
    with pytest.raises(MalformedRow) as exc:
        load_series(path, strict=True)
    assert exc.value.line_no == 2
    assert "OHLC invariant" in exc.value.reason


def test_bad_rows_skipped_with_diagnostics(tmp_path):
    good = "".join(f"600000,2020-01-{d:02d},10,11,9,10,100\n" for d in range(1, 21))
    path = write(tmp_path, good + "600000,2020-02-01,10,9,9.5,10,100\n")
    report = LoadReport()
    [s] = load_series(path, report=report)
    assert len(s) == 20
    assert len(report.rejected) == 1
    assert report.rejected[0].line_no == 22


def test_rejection_rate_over_limit_aborts(tmp_path):
    rows = "".join(f"600000,2020-01-{d:02d},10,11,9,10,100\n" for d in range(1, 9))
    rows += "600000,2020-02-01,-1,11,9,10,100\n600000,2020-02-02,abc,11,9,10,100\n"
    with pytest.raises(RejectionRateExceeded):
        load_series(write(tmp_path, rows))


def _oracle_group_sort(path):
    groups = {}
    with open(path, newline="") as fh:
        for row in list(csv.DictReader(fh)):
            groups.setdefault(row["symbol"], []).append(row["date"])
    return {sym: sorted(dates) for sym, dates in groups.items()}


def test_interleaved_symbols_match_group_then_sort_oracle(tmp_path):
    rows = [
        ("000001", "2020-01-03"), ("600000", "2020-01-02"), ("000001", "2020-01-02"),
        ("600000", "2020-01-06"), ("000001", "2020-01-07"), ("600000", "2020-01-03"),
    ]
    path = write(tmp_path, "".join(f"{s},{d},10,11,9,10,100\n" for s, d in rows))
    report = LoadReport()
    got = load_series(path, report=report)
    expected = _oracle_group_sort(path)
    assert len(got) == 2
    by_ticker = {t: sid for t, sid in report.ticker_map.items()}
    for ticker, dates in expected.items():
        [s] = [x for x in got if x.symbol_id == by_ticker[ticker]]
        assert [b.date.isoformat() for b in s.bars] == dates


def test_unreadable_and_empty(tmp_path):
    with pytest.raises(FileUnreadable):
        load_series(tmp_path / "missing.csv")
    with pytest.raises(EmptySeries):
        load_series(write(tmp_path, ""))
    bad_header = tmp_path / "h.csv"
    bad_header.write_text("date,open\n")
    with pytest.raises(MalformedRow):
        load_series(bad_header)


def test_duplicate_date_rejected(tmp_path):
    rows = "".join(f"600000,2020-01-{d:02d},10,11,9,10,100\n" for d in range(1, 21))
    path = write(tmp_path, rows + "600000,2020-01-05,10,11,9,10,100\n")
    report = LoadReport()
    load_series(path, report=report)
    assert "duplicate date" in report.rejected[0].reason


def test_prices_are_four_place_decimals(tmp_path):
    [s] = load_series(write(tmp_path, "600000,2020-01-02,10.123456,11,9,10.5,100\n"))
    assert s.bars[0].open == Decimal("10.1235")
    assert s.bars[0].open.as_tuple().exponent == -4


def test_load_is_idempotent(universe_csv):
    assert load_series(universe_csv) == load_series(universe_csv)


def test_anonymize_stable_and_distinct(bars60):
    a = anonymize(Series("600519", tuple(bars60)))
    b = anonymize(Series("600519", tuple(bars60)))
    c = anonymize(Series("000001", tuple(bars60)))
    assert a.symbol_id == b.symbol_id
    assert a.symbol_id != c.symbol_id
    assert opaque_id("600519", "other-salt") != a.symbol_id


def test_sidecar_map_holds_the_only_copy_of_tickers(universe_csv, tmp_path):
    map_path = tmp_path / "side" / "map.csv"
    series = load_series(universe_csv, map_path=map_path)
    rows = list(csv.reader(map_path.open()))
    assert rows[0] == ["ticker", "symbol_id"]
    assert {r[1] for r in rows[1:]} == {s.symbol_id for s in series}
    for s in series:
        assert not re.fullmatch(r"\d{6}", s.symbol_id)


def test_prompts_for_anonymized_series_carry_no_ticker(universe_csv):
    pattern = re.compile(r"(?<!\d)(600519|000001|300750)(?!\d)")
    for s in load_series(universe_csv):
        req = build_pretrain_request(None, s.bars[:60], record_id="x")
        assert not pattern.search(req.user_content)
        assert not pattern.search(req.system_prompt)
        # the only 6-digit runs allowed are inside the volume column
        for line in req.user_content.splitlines()[1:]:
            assert not re.search(r"\b\d{6}\b", " ".join(line.split()[:5]))


price = st.decimals(min_value=Decimal("-5"), max_value=Decimal("50"), places=2, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(price, price, price, price, st.integers(-5, 10**6)), min_size=1, max_size=15))
def test_accepted_bars_satisfy_ohlc_invariant(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("prop")
    body = "".join(
        f"600000,{dt.date(2020, 1, 1) + dt.timedelta(days=i)},{o},{h},{l},{c},{v}\n"
        for i, (o, h, l, c, v) in enumerate(rows)
    )
    path = write(tmp, body)
    try:
        series = load_series(path, IngestFormat(max_reject_rate=1.0))
    except EmptySeries:
        return
    for s in series:
        for b in s.bars:
            assert b.low <= min(b.open, b.close) <= max(b.open, b.close) <= b.high
            assert b.low > 0 and b.volume >= 0
