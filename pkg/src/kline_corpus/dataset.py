"""Corpus records, corpus files and word-count statistics."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DanglingImagePath, EmptyCorpus, IdMismatch, InvariantViolation, IoFailure
from .parsing import MAX_TURNS, MIN_TURNS, DialogTurn
from .prompting import INSTRUCT, PRETRAIN
from .render import RenderedChart
from .sampling import Plan

IMAGE_TOKEN = "<image>"
HUMAN, MODEL = "human", "model"
# on-disk speaker names follow the LLaVA conversation files
_WIRE_ROLE = {HUMAN: "human", MODEL: "gpt"}
_ROLE_FROM_WIRE = {v: k for k, v in _WIRE_ROLE.items()}

WORD_COUNT_RULE = "whitespace-tokens+cjk-chars-v1"
QUANTILES = (Fraction(5, 100), Fraction(95, 100))
STAT_MEASURES = ("turns", "question", "answer", "dialog")
STAT_LABELS = {"turns": "# Turns", "question": "# Question", "answer": "# Answer", "dialog": "# Dialog"}
STAT_COLUMNS = ("mean", "q-5%", "q-95%")

_CJK_RE = re.compile(r"[㐀-䶿一-鿿豈-﫿\U00020000-\U0002ebef]+")


@dataclass(frozen=True)
class Message:
    role: str
    text: str


@dataclass
class DatasetRecord:
    id: str
    image: str
    conversations: list[Message]
    stage: str
    meta: dict = field(default_factory=dict)

    def turns(self) -> list[tuple[str, str]]:
        msgs = self.conversations
        return [(strip_image_token(msgs[i].text), msgs[i + 1].text) for i in range(0, len(msgs) - 1, 2)]

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "image": self.image,
            "conversations": [{"from": _WIRE_ROLE[m.role], "value": m.text} for m in self.conversations],
            "stage": self.stage,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DatasetRecord":
        msgs = [Message(_ROLE_FROM_WIRE.get(m["from"], m["from"]), m["value"]) for m in data["conversations"]]
        return cls(data["id"], data["image"], msgs, data["stage"], data.get("meta", {}))


def strip_image_token(text: str) -> str:
    return text.replace(IMAGE_TOKEN, "").strip()


def image_relpath(record_id: str) -> str:
    return f"images/{record_id}.png"


def record_violations(rec: DatasetRecord) -> list[str]:
    """Every structural invariant the record breaks (empty when valid)."""
    problems = []
    msgs = rec.conversations
    if not msgs:
        return ["no messages"]
    for i, m in enumerate(msgs):
        expected = HUMAN if i % 2 == 0 else MODEL
        if m.role != expected:
            problems.append(f"alternation: message {i} is {m.role!r}, expected {expected!r}")
            break
        if not m.text.strip():
            problems.append(f"empty message {i}")
    if len(msgs) % 2:
        problems.append("conversation ends on a human message")
    first_human = msgs[0].text if msgs[0].role == HUMAN else ""
    n_tokens = first_human.count(IMAGE_TOKEN)
    if n_tokens != 1:
        problems.append(f"placeholder: first human message holds {n_tokens} image tokens")
    if any(IMAGE_TOKEN in m.text for m in msgs[1:]):
        problems.append("placeholder: image token outside the first human message")
    n_turns = len(msgs) // 2
    if rec.stage == PRETRAIN and n_turns != 1:
        problems.append(f"turns: pretrain record has {n_turns} turns")
    elif rec.stage == INSTRUCT and not MIN_TURNS <= n_turns <= MAX_TURNS:
        problems.append(f"turns: instruct record has {n_turns} turns")
    elif rec.stage not in (PRETRAIN, INSTRUCT):
        problems.append(f"unknown stage {rec.stage!r}")
    return problems


def pick_instruction(plan: Plan, pool: Sequence[str]) -> str:
    return pool[plan.spec.seed % len(pool)]


def assemble_record(
    plan: Plan,
    rendered: RenderedChart,
    dialog: str | Sequence[DialogTurn],
    instruction_text: str | None = None,
    *,
    record_id: str | None = None,
    meta: dict | None = None,
) -> DatasetRecord:
    """Bind a rendered chart and its annotation into one corpus record.

    A string ``dialog`` is a pre-training answer and is paired with
    ``instruction_text``; a sequence of turns makes an instruction record
    whose first question carries the image token.
    """
    if record_id is not None and record_id != plan.record_id:
        raise IdMismatch(f"annotation for {record_id} attached to plan {plan.record_id}")
    if rendered.spec != plan.spec:
        raise IdMismatch(f"chart for plan {plan.record_id} was rendered from a different spec")
    if isinstance(dialog, str):
        if not instruction_text:
            raise InvariantViolation("pretrain record needs an instruction")
        stage = PRETRAIN
        msgs = [Message(HUMAN, f"{IMAGE_TOKEN}\n{instruction_text}"), Message(MODEL, dialog)]
    else:
        stage = INSTRUCT
        msgs = []
        for i, turn in enumerate(dialog):
            q = f"{IMAGE_TOKEN}\n{turn.question}" if i == 0 else turn.question
            msgs += [Message(HUMAN, q), Message(MODEL, turn.answer)]
    w = plan.window
    full_meta = {
        "symbol_id": w.symbol_id,
        "start": w.start,
        "total_len": w.total_len,
        "prompt_len": w.prompt_len,
        "spec": plan.spec.summary(),
        "image_sha256": rendered.content_hash,
    }
    full_meta.update(meta or {})
    rec = DatasetRecord(plan.record_id, image_relpath(plan.record_id), msgs, stage, full_meta)
    problems = record_violations(rec)
    if problems:
        raise InvariantViolation(f"record {rec.id}: {'; '.join(problems)}")
    return rec


def dump_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2) + "\n"


def write_corpus(records: Iterable[DatasetRecord], out_dir: str | Path, manifest: dict | None = None) -> dict:
    """Write ``pretrain.json``, ``instruct.json`` and ``manifest.json`` under ``out_dir``.

    Records keep their given order within each file. Every record's image must
    already exist on disk.
    """
    out_dir = Path(out_dir)
    records = list(records)
    for rec in records:
        if not (out_dir / rec.image).is_file():
            raise DanglingImagePath(rec.id, rec.image)
    split = {
        PRETRAIN: [r.to_json() for r in records if r.stage == PRETRAIN],
        INSTRUCT: [r.to_json() for r in records if r.stage == INSTRUCT],
    }
    manifest = dict(manifest or {})
    manifest.setdefault("counts", {})
    manifest["counts"].update({f"{k}_records": len(v) for k, v in split.items()})
    manifest.setdefault("word_count_rule", WORD_COUNT_RULE)
    try:
        for stage, rows in split.items():
            atomic_write(out_dir / f"{stage}.json", dump_json(rows))
        atomic_write(out_dir / "manifest.json", dump_json(manifest))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return manifest


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def load_records(out_dir: str | Path) -> list[DatasetRecord]:
    out_dir = Path(out_dir)
    records = []
    for stage in (PRETRAIN, INSTRUCT):
        path = out_dir / f"{stage}.json"
        if path.exists():
            records += [DatasetRecord.from_json(r) for r in json.loads(path.read_text(encoding="utf-8"))]
    return records


# --------------------------------------------------------------------------
# statistics


def word_count(text: str) -> int:
    """Whitespace-separated tokens, except each CJK character counts on its own."""
    total = 0
    for token in text.split():
        pieces = _CJK_RE.split(token)
        total += sum(len(run) for run in _CJK_RE.findall(token))
        total += sum(1 for p in pieces if p)
    return total


def nearest_rank(values: Sequence, p: Fraction) -> object:
    """The ceil(p*n)-th smallest value (1-based), clamped to rank 1."""
    if not values:
        raise EmptyCorpus("no values")
    ordered = sorted(values)
    # floats go through str so 0.05 means 5/100, not its binary neighbour
    p = Fraction(str(p)) if isinstance(p, float) else Fraction(p)
    rank = max(1, math.ceil(p * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class Summary:
    mean: float
    q5: int
    q95: int


@dataclass(frozen=True)
class StageStats:
    count: int
    measures: dict[str, Summary]


@dataclass(frozen=True)
class DatasetStats:
    stages: dict[str, StageStats]


def summarize(values: Sequence[int]) -> Summary:
    if not values:
        raise EmptyCorpus("cannot summarize an empty sample")
    return Summary(
        mean=math.fsum(values) / len(values),
        q5=nearest_rank(values, QUANTILES[0]),
        q95=nearest_rank(values, QUANTILES[1]),
    )


def measure_values(records: Sequence[DatasetRecord]) -> dict[str, list[int]]:
    """Per-record turn and dialog counts; per-turn question and answer counts."""
    out = {m: [] for m in STAT_MEASURES}
    for rec in records:
        turns = rec.turns()
        q = [word_count(t[0]) for t in turns]
        a = [word_count(t[1]) for t in turns]
        out["turns"].append(len(turns))
        out["question"] += q
        out["answer"] += a
        out["dialog"].append(sum(q) + sum(a))
    return out


def compute_stats(records: Sequence[DatasetRecord]) -> DatasetStats:
    if not records:
        raise EmptyCorpus("no records")
    stages = {}
    for stage in (PRETRAIN, INSTRUCT):
        subset = [r for r in records if r.stage == stage]
        if not subset:
            continue
        values = measure_values(subset)
        measures = {m: summarize(v) for m, v in values.items() if stage == INSTRUCT or m != "turns"}
        stages[stage] = StageStats(len(subset), measures)
    return DatasetStats(stages)


def _fmt(x) -> str:
    return f"{x:.2f}" if isinstance(x, float) else str(x)


def stats_rows(stats: DatasetStats) -> list[tuple[str, str, str, str, str]]:
    rows = []
    for stage, st in stats.stages.items():
        label = "pre-train" if stage == PRETRAIN else "instruction"
        for m in STAT_MEASURES:
            if m in st.measures:
                s = st.measures[m]
                rows.append((label, STAT_LABELS[m], _fmt(s.mean), _fmt(s.q5), _fmt(s.q95)))
    return rows


def format_stats_table(stats: DatasetStats) -> str:
    """Plain-text table: stage, measure, then mean / q-5% / q-95% columns."""
    header = ("", "", *STAT_COLUMNS)
    rows = [header, *stats_rows(stats)]
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    prev = None
    for r in rows:
        shown = ("" if r[0] == prev else r[0], *r[1:])
        prev = r[0]
        lines.append("  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(shown, widths))).rstrip())
    return "\n".join(lines) + "\n"


def stats_csv(stats: DatasetStats) -> str:
    lines = ["stage,measure,count,mean,q-5%,q-95%"]
    for stage, st in stats.stages.items():
        for m in STAT_MEASURES:
            if m in st.measures:
                s = st.measures[m]
                lines.append(f"{stage},{m},{st.count},{s.mean!r},{s.q5},{s.q95}")
    return "\n".join(lines) + "\n"
