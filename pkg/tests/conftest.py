import datetime as dt
from decimal import Decimal
from pathlib import Path

import pytest

from kline_corpus.market_data import OhlcvBar, write_series_csv
from kline_corpus.pipeline import config_from_dict
from kline_corpus.synthetic import random_walk_bars, synthetic_universe

RAW_TICKERS = ["600519", "000001", "300750"]

_acceptance_lines: list[str] = []


def bar(day: str, o, h, l, c, v=1000) -> OhlcvBar:
    return OhlcvBar(dt.date.fromisoformat(day), *(Decimal(str(x)) for x in (o, h, l, c)), v)


@pytest.fixture
def criterion():
    """Record a one-line pass/fail verdict for an acceptance criterion."""

    def report(number: int, title: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
        _acceptance_lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def universe_csv(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "universe.csv"
    write_series_csv(synthetic_universe(RAW_TICKERS, 400, seed=3), path)
    return path


@pytest.fixture
def bars60():
    return random_walk_bars(60, seed=11)


def make_config(universe_csv, out_dir, **overrides):
    data = {
        "seed": 42,
        "inputs": [str(universe_csv)],
        "out_dir": str(out_dir),
        "pretrain_count": 10,
        "instruct_count": 10,
        "checkpoint_every": 50,
    }
    for key, value in overrides.items():
        if "__" in key:
            section, leaf = key.split("__")
            data.setdefault(section, {})[leaf] = value
        else:
            data[key] = value
    return config_from_dict(data)
