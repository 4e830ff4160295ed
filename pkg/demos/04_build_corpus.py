"""Generate a small mixed corpus with the mock backend, then report on it.

    python demos/04_build_corpus.py [out_dir]

Rerunning against the same directory resumes instead of starting over.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from kline_corpus.dataset import compute_stats, format_stats_table, load_records
from kline_corpus.market_data import write_series_csv
from kline_corpus.pipeline import config_from_dict, run_pipeline, validate_corpus
from kline_corpus.synthetic import synthetic_universe


def main(out_dir: Path) -> None:
    with tempfile.TemporaryDirectory() as tmp:
        csv_path = Path(tmp) / "universe.csv"
        write_series_csv(synthetic_universe(["600519", "000001", "300750", "601318"], 300, seed=2), csv_path)
        cfg = config_from_dict({
            "seed": 42,
            "inputs": [str(csv_path)],
            "out_dir": str(out_dir),
            "pretrain_count": 40,
            "instruct_count": 40,
            # corrupt some answers on purpose so the rejects/ folder has content
            "backend": {"kind": "mock", "mock_fault_rate": 0.15},
        })
        status, manifest = run_pipeline(cfg)

    print(f"status {status}: {json.dumps(manifest['counts'])}")
    print(f"rejection reasons: {manifest['rejections']}")
    print()
    print(format_stats_table(compute_stats(load_records(out_dir))))
    report = validate_corpus(out_dir)
    print(f"validate: {report['records']} records, {len(report['violations'])} violations")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_corpus"))
