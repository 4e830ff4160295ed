"""Score direction forecasts against the held-out segment of each record.

    python demos/05_trend_eval.py [corpus_dir]

Reads a corpus made by 04_build_corpus.py. The forecast is pulled out of the
mock's answers with a regular expression; with a real model this extraction
would be done by hand or by a separate tool.
"""

from __future__ import annotations

import re
import sys
from pathlib import Path

from kline_corpus.dataset import load_records
from kline_corpus.trend import TrendLabel, score_directions

FORECAST = re.compile(r"likely to follow an? (upward|downward|sideways) trajectory")
WORD_TO_DIRECTION = {"upward": "up", "downward": "down", "sideways": "flat"}


def extract(answer_text: str) -> str | None:
    m = FORECAST.search(answer_text)
    return WORD_TO_DIRECTION[m.group(1)] if m else None


def main(corpus: Path) -> None:
    records = [r for r in load_records(corpus) if r.stage == "instruct"]
    preds = [extract(" ".join(a for _, a in r.turns())) for r in records]
    truth = [TrendLabel.from_json(r.meta["trend"]) for r in records]

    report = score_directions(preds, truth)
    print(f"{report['n']} records, accuracy {report['accuracy']:.3f}, abstentions {report['abstentions']}")
    print("truth \\ predicted   up  down  flat  abstain")
    for t, row in report["confusion"].items():
        print(f"{t:>18} " + " ".join(f"{row[p]:>5}" for p in ("up", "down", "flat", "abstain")))

    # A contrarian who always calls the opposite move shows what failure looks like.
    flip = {"up": "down", "down": "up", "flat": "flat"}
    contrarian = score_directions([flip[t.direction] for t in truth], truth)
    print(f"contrarian accuracy {contrarian['accuracy']:.3f}")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_corpus"))
