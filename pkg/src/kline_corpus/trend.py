"""Ground-truth trend labels for predict segments and direction scoring."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .errors import EmptySegment, LengthMismatch
from .market_data import OhlcvBar

UP, DOWN, FLAT = "up", "down", "flat"
DIRECTIONS = (UP, DOWN, FLAT)
ABSTAIN = "abstain"
DEFAULT_EPSILON = Fraction(5, 1000)


@dataclass(frozen=True)
class TrendLabel:
    direction: str
    magnitude: Fraction

    def to_json(self) -> dict:
        return {"direction": self.direction, "magnitude": str(self.magnitude), "change": float(self.magnitude)}

    @classmethod
    def from_json(cls, data: dict) -> "TrendLabel":
        return cls(data["direction"], Fraction(data["magnitude"]))


def direction_of(magnitude: Fraction, epsilon: Fraction) -> str:
    if magnitude > epsilon:
        return UP
    if magnitude < -epsilon:
        return DOWN
    return FLAT


def trend_label(predict_bars: Sequence[OhlcvBar], epsilon=DEFAULT_EPSILON) -> TrendLabel:
    """Direction and fractional change of the close from first to last bar.

    Exact rational arithmetic, so the label is invariant under rescaling all
    prices by any positive factor.
    """
    if not predict_bars:
        raise EmptySegment("predict segment is empty")
    eps = Fraction(str(epsilon)) if isinstance(epsilon, float) else Fraction(epsilon)
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    first = Fraction(predict_bars[0].close)
    last = Fraction(predict_bars[-1].close)
    magnitude = (last - first) / first
    return TrendLabel(direction_of(magnitude, eps), magnitude)


def score_directions(pred: Sequence[str | None], truth: Sequence[TrendLabel]) -> dict:
    """Accuracy report for extracted direction predictions.

    ``None`` (or any value outside up/down/flat) counts as an abstention and is
    scored wrong. The confusion matrix is keyed ``[truth][prediction]`` and
    includes an ``abstain`` column.
    """
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions for {len(truth)} labels")
    cols = (*DIRECTIONS, ABSTAIN)
    confusion = {t: {p: 0 for p in cols} for t in DIRECTIONS}
    correct = abstentions = 0
    for p, t in zip(pred, truth):
        p = p if p in DIRECTIONS else ABSTAIN
        abstentions += p == ABSTAIN
        correct += p == t.direction
        confusion[t.direction][p] += 1
    n = len(truth)
    return {
        "n": n,
        "accuracy": correct / n if n else 0.0,
        "correct": correct,
        "abstentions": abstentions,
        "truth_counts": {t: sum(row.values()) for t, row in confusion.items()},
        "confusion": confusion,
    }


def read_predictions(path: str | Path) -> dict[str, str]:
    """Load a ``record_id,direction`` file; a header row is optional."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            rid, direction = row[0].strip(), (row[1].strip().lower() if len(row) > 1 else "")
            if rid == "record_id":
                continue
            out[rid] = direction
    return out
