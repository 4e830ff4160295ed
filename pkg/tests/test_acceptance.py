"""Acceptance criteria, one test each, all offline against the mock backend.

Each test prints a single ``[PASS]``/``[FAIL] criterion N`` line; the lines are
repeated in the terminal summary under "acceptance criteria".
"""

import datetime as dt
import hashlib
import io
import json
import random
import re
import shutil
import time
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from PIL import Image

from conftest import RAW_TICKERS, make_config
from golden.fixtures import GOLDEN, GOLDEN_PIXEL_SHA256, GOLDEN_PNG_SHA256, lcg_bars
from test_dataset import brute_stats, random_records
from kline_corpus.annotate import MockBackend
from kline_corpus.dataset import STAT_COLUMNS, STAT_LABELS, compute_stats, format_stats_table
from kline_corpus.errors import ContentViolation, EmptyAnswer, ResponseParseError, UnpairedSegments
from kline_corpus.market_data import OhlcvBar, Series, load_series
from kline_corpus.parsing import (
    LEAKAGE_PHRASES,
    TICKER_RE,
    ContentFilter,
    DialogTurn,
    join_dialog,
    parse_instruct_dialog,
    parse_pretrain_answer,
)
from kline_corpus.pipeline import run_pipeline, validate_corpus
from kline_corpus.render import moving_average, render
from kline_corpus.sampling import CANDLESTICK, plan_corpus, sample_window
from kline_corpus.synthetic import random_walk_bars
from kline_corpus.trend import TrendLabel, score_directions, trend_label

PERMISSIVE = ContentFilter(segment_tokens=(), leakage_phrases=(), check_tickers=False)
FORECAST_RE = re.compile(r"likely to follow an? (upward|downward|sideways) trajectory")
FORECAST_DIRECTION = {"upward": "up", "downward": "down", "sideways": "flat"}


class RecordingMock(MockBackend):
    """Mock backend that remembers which requests it deliberately corrupted."""

    def __init__(self, **kw):
        super().__init__(**kw)
        self.injected = {}

    def complete(self, request):
        kind = self.fault_kind(request)
        if kind:
            self.injected[request.record_id] = kind
        return super().complete(request)


@pytest.fixture(scope="module")
def big_corpus(universe_csv, tmp_path_factory):
    """1,000 records (500 per stage) with a tenth of the answers corrupted."""
    out = tmp_path_factory.mktemp("accept") / "corpus"
    cfg = make_config(universe_csv, out, pretrain_count=500, instruct_count=500, checkpoint_every=250,
                      max_in_flight=8, backend__mock_fault_rate=0.1)
    backend = RecordingMock(epsilon=cfg.epsilon, fault_rate=0.1)
    status, manifest = run_pipeline(cfg, backend)
    assert status == 0
    return out, manifest, backend


def test_criterion_1_chart_mix(universe_csv, criterion):
    series = load_series(universe_csv)
    t0 = time.perf_counter()
    plans = plan_corpus(series, 10_000, np.random.default_rng(42))
    elapsed = time.perf_counter() - t0
    frac = sum(p.spec.chart_type == CANDLESTICK for p in plans) / len(plans)
    ok = len(plans) == 10_000 and 0.788 <= frac <= 0.812 and elapsed < 10
    criterion(1, "candlestick share of 10,000 plans", ok, f"fraction={frac:.4f}, planning {elapsed:.2f}s")
    assert ok


def test_criterion_2_window_law(criterion):
    s = Series("sym_x", tuple(random_walk_bars(1000, seed=8)))
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(10_000):
        w = sample_window(s, rng)
        frac = Fraction(w.prompt_len, w.total_len)
        if not (60 <= w.total_len <= 80 and Fraction(6, 10) <= frac <= Fraction(8, 10)):
            bad += 1
    criterion(2, "window length and prompt fraction", bad == 0, f"{bad} violations in 10,000 windows")
    assert bad == 0


def _random_turn_text(rng):
    alphabet = "abcXYZ 0123456789.,?!-\n\t中文é$%#"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 40))).strip() or "x"


def test_criterion_3_dialog_format(criterion):
    rng = random.Random(3)
    round_trip_failures = 0
    for _ in range(1000):
        turns = [DialogTurn(_random_turn_text(rng), _random_turn_text(rng)) for _ in range(rng.randint(1, 10))]
        if parse_instruct_dialog(join_dialog(turns), PERMISSIVE, min_turns=1, max_turns=10) != turns:
            round_trip_failures += 1

    crashes = 0
    for _ in range(10_000):
        text = rng.randbytes(rng.randint(0, 200)).decode("utf-8", errors="replace")
        for parse in (parse_instruct_dialog, parse_pretrain_answer):
            try:
                parse(text)
            except ResponseParseError:
                pass
            except Exception:  # noqa: BLE001 - anything else is a crash
                crashes += 1

    fixtures = [
        (parse_instruct_dialog, "Q1@A1@Q2@", UnpairedSegments),
        (parse_pretrain_answer, "  \n\t ", EmptyAnswer),
        (parse_pretrain_answer, "Shares of 600519 rallied.", ContentViolation),
    ]
    named = 0
    for parse, raw, err in fixtures:
        try:
            parse(raw)
        except err:
            named += 1
        except ResponseParseError:
            pass
    ok = round_trip_failures == 0 and crashes == 0 and named == len(fixtures)
    criterion(3, "dialog round trip, noise fuzz, malformed fixtures", ok,
              f"round-trip failures={round_trip_failures}/1000, crashes={crashes}/10000, named errors={named}/3")
    assert ok


def _image_hashes(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted((out / "images").glob("*.png"))}


def test_criterion_4_end_to_end_determinism(universe_csv, tmp_path, criterion):
    runs, times = [], []
    for name in ("a", "b"):
        out = tmp_path / name
        t0 = time.perf_counter()
        status, _ = run_pipeline(make_config(universe_csv, out, seed=42, pretrain_count=100, instruct_count=100,
                                             backend__mock_fault_rate=0.1))
        times.append(time.perf_counter() - t0)
        assert status == 0
        runs.append(out)
    a, b = runs
    same_json = all((a / f).read_bytes() == (b / f).read_bytes() for f in ("pretrain.json", "instruct.json"))
    same_images = _image_hashes(a) == _image_hashes(b) and len(_image_hashes(a)) > 0
    ok = same_json and same_images and max(times) < 120
    criterion(4, "two seed-42 runs of 200 records are byte-identical", ok,
              f"json identical={same_json}, images identical={same_images}, slowest run {max(times):.1f}s")
    assert ok


def test_criterion_5_statistics_oracle(criterion):
    mismatches = 0
    for seed in range(100):
        rng = random.Random(1000 + seed)
        recs = random_records(rng, rng.randint(1, 150))
        got, want = compute_stats(recs), brute_stats(recs)
        if set(got.stages) != set(want):
            mismatches += 1
            continue
        for stage, measures in want.items():
            if set(got.stages[stage].measures) != set(measures):
                mismatches += 1
            for k, (mean, q5, q95) in measures.items():
                s = got.stages[stage].measures.get(k)
                if s is None or (s.q5, s.q95) != (q5, q95) or abs(s.mean - mean) > 1e-9:
                    mismatches += 1
    table = format_stats_table(compute_stats(random_records(random.Random(0), 40)))
    header_ok = table.splitlines()[0].split() == list(STAT_COLUMNS)
    labels_ok = all(label in table for label in [*STAT_LABELS.values(), "pre-train", "instruction"])
    ok = mismatches == 0 and header_ok and labels_ok
    criterion(5, "statistics match brute force on 100 fixtures", ok,
              f"mismatches={mismatches}, header={header_ok}, labels={labels_ok}")
    assert ok


def _closes(values):
    return [OhlcvBar(dt.date(2020, 1, 1 + i), v, v, v, v, 1) for i, v in enumerate(values)]


def test_criterion_6_trend_oracle(big_corpus, criterion):
    rng = random.Random(6)
    eps = Decimal("0.005")
    sign_errors = scale_errors = 0
    for _ in range(1000):
        closes = [Decimal(rng.randint(1, 10**7)).scaleb(-4) for _ in range(rng.randint(1, 25))]
        diff = closes[-1] - closes[0]
        want = "up" if diff > eps * closes[0] else "down" if diff < -eps * closes[0] else "flat"
        label = trend_label(_closes(closes), Fraction(eps))
        sign_errors += label.direction != want
        c = Decimal(rng.randint(1, 10**5)).scaleb(-rng.randint(0, 3))
        scale_errors += trend_label(_closes([x * c for x in closes]), Fraction(eps)) != label

    out, _, _ = big_corpus
    records = json.loads((out / "instruct.json").read_text())
    preds, truth = [], []
    for rec in records:
        text = " ".join(m["value"] for m in rec["conversations"] if m["from"] == "gpt")
        m = FORECAST_RE.search(text)
        preds.append(FORECAST_DIRECTION[m.group(1)] if m else None)
        truth.append(TrendLabel.from_json(rec["meta"]["trend"]))
    report = score_directions(preds, truth)
    ok = sign_errors == 0 and scale_errors == 0 and report["accuracy"] == 1.0 and len(records) >= 400
    criterion(6, "trend labels and end-to-end mock accuracy", ok,
              f"sign errors={sign_errors}/1000, scale errors={scale_errors}/1000, "
              f"accuracy={report['accuracy']:.3f} on {report['n']} records")
    assert ok


def test_criterion_7_content_hygiene(big_corpus, criterion):
    out, manifest, backend = big_corpus
    ticker_hits = leakage_hits = 0
    for stage in ("pretrain", "instruct"):
        for rec in json.loads((out / f"{stage}.json").read_text()):
            for m in rec["conversations"]:
                text = m["value"]
                ticker_hits += bool(TICKER_RE.search(text)) or any(t in text for t in RAW_TICKERS)
                leakage_hits += any(p in text.lower() for p in LEAKAGE_PHRASES)
    accepted = {r["id"] for s in ("pretrain", "instruct") for r in json.loads((out / f"{s}.json").read_text())}
    missing = 0
    for rid in backend.injected:
        path = out / "rejects" / f"{rid}.json"
        if rid in accepted or not path.exists() or not json.loads(path.read_text()).get("reason"):
            missing += 1
    total = len(accepted) + manifest["counts"]["rejected"]
    ok = ticker_hits == 0 and leakage_hits == 0 and missing == 0 and backend.injected and total == 1000
    criterion(7, "no tickers or leakage in 1,000-record corpus; faults quarantined", ok,
              f"ticker hits={ticker_hits}, leakage hits={leakage_hits}, "
              f"injected={len(backend.injected)}, unquarantined={missing}")
    assert ok


def test_criterion_8_record_invariants(big_corpus, universe_csv, tmp_path, criterion):
    out, _, _ = big_corpus
    fresh = validate_corpus(out)
    small = tmp_path / "small"
    run_pipeline(make_config(universe_csv, small, seed=8))
    fresh_small = validate_corpus(small)

    def mutated(kind):
        target = tmp_path / kind
        shutil.copytree(small, target)
        if kind == "image":
            rec = json.loads((target / "pretrain.json").read_text())[0]
            (target / rec["image"]).write_bytes(b"\x89PNG\r\n\x1a\ntruncated")
        else:
            stage = "instruct" if kind == "alternation" else "pretrain"
            path = target / f"{stage}.json"
            rows = json.loads(path.read_text())
            if kind == "alternation":
                rows[0]["conversations"][0]["from"] = "gpt"
            else:
                rows[0]["conversations"][0]["value"] = rows[0]["conversations"][0]["value"].replace("<image>", "")
            path.write_text(json.dumps(rows))
        return kind in {v["kind"] for v in validate_corpus(target)["violations"]}

    detected = {k: mutated(k) for k in ("image", "alternation", "placeholder")}
    ok = fresh["ok"] and fresh_small["ok"] and all(detected.values())
    criterion(8, "fresh corpora validate; targeted mutations detected", ok,
              f"violations on fresh corpora={len(fresh['violations']) + len(fresh_small['violations'])}, "
              f"detected={detected}")
    assert ok


def test_criterion_9_renderer_regression(criterion):
    mismatched = []
    for _ in range(2):
        for name, n, seed, spec in GOLDEN:
            chart = render(None, lcg_bars(n, seed), spec)
            with Image.open(io.BytesIO(chart.png_bytes)) as img:
                pixels = hashlib.sha256(img.convert("RGB").tobytes()).hexdigest()
            if chart.content_hash != GOLDEN_PNG_SHA256[name] or pixels != GOLDEN_PIXEL_SHA256[name]:
                mismatched.append(name)

    rng = random.Random(9)
    ma_errors = 0
    for _ in range(500):
        closes = [Decimal(rng.randint(1, 10**7)).scaleb(-4) for _ in range(rng.randint(1, 40))]
        shift = Decimal(rng.randint(-10**5, 10**5)).scaleb(-4)
        k = rng.choice([3, 6, 9])
        base, moved = moving_average(closes, k), moving_average([c + shift for c in closes], k)
        ma_errors += any((a is None) != (b is None) or (a is not None and b != a + Fraction(shift))
                         for a, b in zip(base, moved))
        const = moving_average([closes[0]] * len(closes), k)
        ma_errors += any(v is not None and v != Fraction(closes[0]) for v in const)
    ok = not mismatched and ma_errors == 0
    criterion(9, "golden renders and moving-average properties", ok,
              f"golden mismatches={sorted(set(mismatched))}, MA property failures={ma_errors}")
    assert ok
