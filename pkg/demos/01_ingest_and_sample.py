"""Load a daily OHLCV file, anonymize its tickers and draw a few windows.

    python demos/01_ingest_and_sample.py [work_dir]
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

import numpy as np

from kline_corpus.market_data import LoadReport, load_series, write_series_csv
from kline_corpus.sampling import sample_chart_spec, sample_window
from kline_corpus.synthetic import synthetic_universe


def main(work_dir: Path) -> None:
    # A made-up three-symbol market stands in for a real vendor export.
    work_dir.mkdir(parents=True, exist_ok=True)
    csv_path = work_dir / "universe.csv"
    write_series_csv(synthetic_universe(["600519", "000001", "300750"], 250, seed=1), csv_path)

    report = LoadReport()
    series = load_series(csv_path, report=report)
    print(f"read {report.rows} rows, rejected {len(report.rejected)}")
    for s in series:
        print(f"  {s.symbol_id}: {len(s)} bars, {s.bars[0].date} .. {s.bars[-1].date}")

    # Every random choice flows from one seeded generator, so rerunning
    # this script prints the same windows.
    rng = np.random.default_rng(42)
    print("\nfive sampled windows")
    for i in range(5):
        s = series[i % len(series)]
        w = sample_window(s, rng)
        spec = sample_chart_spec(rng)
        print(f"  {s.symbol_id} start={w.start:3d} bars={w.total_len} shown={w.prompt_len} "
              f"({w.prompt_fraction:.0%}) -> {spec.chart_type}, MA{list(spec.ma_periods)}, "
              f"volume={'on' if spec.show_volume else 'off'}, style={spec.style_id}")


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(Path(tmp))
