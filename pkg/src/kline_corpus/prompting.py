"""K-line text serialization and annotation prompt construction.

Template texts live under ``prompts/<lang>/`` next to this module and are
checked against ``prompts/templates.json`` on every load, so a silently edited
template cannot leak into a corpus.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .errors import EmptyBars, KlineParseError, TemplateTampered
from .market_data import PRICE_QUANTUM, OhlcvBar
from .sampling import Window

PROMPT_DIR = Path(__file__).with_name("prompts")
KLINE_HEADER = "date open high low close volume"
PROMPT_SLOT = "{prompt_data}"
PREDICT_SLOT = "{predict_data}"

PRETRAIN = "pretrain"
INSTRUCT = "instruct"


@dataclass(frozen=True)
class AnnotationRequest:
    stage: str
    system_prompt: str
    user_content: str
    record_id: str
    window: Window | None


def template_path(name: str, lang: str = "en", root: Path = PROMPT_DIR) -> Path:
    return root / lang / name


@lru_cache(maxsize=None)
def _registry(root: Path) -> dict[str, str]:
    with open(root / "templates.json", encoding="utf-8") as fh:
        return json.load(fh)["sha256"]


def template_sha256(name: str, lang: str = "en", root: Path = PROMPT_DIR) -> str:
    return hashlib.sha256(template_path(name, lang, root).read_bytes()).hexdigest()


def load_template(name: str, lang: str = "en", root: Path = PROMPT_DIR) -> str:
    """Read a template, refusing it if its digest differs from the registry."""
    raw = template_path(name, lang, root).read_bytes()
    key = f"{lang}/{name}"
    expected = _registry(root).get(key)
    actual = hashlib.sha256(raw).hexdigest()
    if expected != actual:
        raise TemplateTampered(f"{key}: sha256 {actual} does not match registry {expected}")
    return raw.decode("utf-8")


def instruction_pool(lang: str = "en", root: Path = PROMPT_DIR) -> list[str]:
    text = load_template("instructions.txt", lang, root)
    return [line.strip() for line in text.splitlines() if line.strip()]


def format_bar(bar: OhlcvBar) -> str:
    prices = " ".join(str(p.quantize(PRICE_QUANTUM)) for p in (bar.open, bar.high, bar.low, bar.close))
    return f"{bar.date.isoformat()} {prices} {bar.volume}"


def serialize_kline(bars: Sequence[OhlcvBar]) -> str:
    """Header line followed by one space-separated row per bar, no trailing newline."""
    if not bars:
        raise EmptyBars("cannot serialize an empty bar list")
    return "\n".join([KLINE_HEADER, *(format_bar(b) for b in bars)])


def parse_kline(text: str) -> list[OhlcvBar]:
    lines = text.strip("\n").split("\n")
    if not lines or lines[0].strip() != KLINE_HEADER:
        raise KlineParseError("missing k-line header")
    bars = []
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 6:
            raise KlineParseError(f"line {n}: expected 6 fields, got {len(parts)}")
        try:
            bars.append(
                OhlcvBar(
                    dt.date.fromisoformat(parts[0]),
                    *(Decimal(p) for p in parts[1:5]),
                    int(parts[5]),
                )
            )
        except ValueError as exc:
            raise KlineParseError(f"line {n}: {exc}") from exc
    if not bars:
        raise KlineParseError("no data rows")
    return bars


def build_pretrain_request(
    window: Window | None, prompt_bars: Sequence[OhlcvBar], record_id: str = "", lang: str = "en"
) -> AnnotationRequest:
    if window is not None and len(prompt_bars) != window.prompt_len:
        raise ValueError("prompt_bars does not match the window's prompt segment")
    return AnnotationRequest(
        stage=PRETRAIN,
        system_prompt=load_template("pretrain.txt", lang),
        user_content=serialize_kline(prompt_bars),
        record_id=record_id,
        window=window,
    )


def fill_instruct_template(template: str, prompt_block: str, predict_block: str) -> str:
    lines = template.split("\n")
    for slot in (PROMPT_SLOT, PREDICT_SLOT):
        if sum(line.strip() == slot for line in lines) != 1:
            raise ValueError(f"template must hold {slot} exactly once on its own line")
    filled = [
        prompt_block if line.strip() == PROMPT_SLOT else predict_block if line.strip() == PREDICT_SLOT else line
        for line in lines
    ]
    return "\n".join(filled)


def build_instruct_request(
    window: Window | None,
    prompt_bars: Sequence[OhlcvBar],
    predict_bars: Sequence[OhlcvBar],
    record_id: str = "",
    lang: str = "en",
) -> AnnotationRequest:
    """Instruction-stage request: the whole filled template goes in the user turn."""
    if window is not None and (len(prompt_bars), len(predict_bars)) != (window.prompt_len, window.predict_len):
        raise ValueError("bar segments do not match the window")
    content = fill_instruct_template(
        load_template("instruct.txt", lang), serialize_kline(prompt_bars), serialize_kline(predict_bars)
    )
    return AnnotationRequest(INSTRUCT, "", content, record_id, window)


def extract_kline_blocks(text: str) -> list[str]:
    """Every header-led run of k-line rows embedded in ``text``, in order."""
    blocks, current = [], None
    for line in text.split("\n"):
        if line.strip() == KLINE_HEADER:
            if current:
                blocks.append("\n".join(current))
            current = [KLINE_HEADER]
        elif current is not None and len(line.split()) == 6 and line[:4].isdigit():
            current.append(line)
        elif current is not None:
            blocks.append("\n".join(current))
            current = None
    if current:
        blocks.append("\n".join(current))
    return blocks
