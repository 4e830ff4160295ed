"""Validation of backend answers and the ``Question@Answer@`` dialog format."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ContentViolation, EmptyAnswer, UnpairedSegments, TurnCountOutOfRange
from .prompting import INSTRUCT, PRETRAIN

SEPARATOR = "@"
FULLWIDTH_SEPARATOR = "＠"
MIN_TURNS = 3
MAX_TURNS = 7

# a bare six-digit number, as A-share tickers are written
TICKER_RE = re.compile(r"(?<![\d.,])\d{6}(?![\d,]|\.\d)")

SEGMENT_TOKENS = ("date", "open", "high", "low", "close", "volume")
LEAKAGE_PHRASES = ("future data", "predict data", "predicted data", "future-data")


@dataclass(frozen=True)
class DialogTurn:
    question: str
    answer: str

    def __post_init__(self):
        for part in (self.question, self.answer):
            if not part.strip():
                raise ValueError("empty question or answer")
            if SEPARATOR in part:
                raise ValueError("separator inside turn text")


@dataclass(frozen=True)
class ContentFilter:
    """Blocklists applied to generated text; swap per template language."""

    segment_tokens: tuple[str, ...] = SEGMENT_TOKENS
    leakage_phrases: tuple[str, ...] = LEAKAGE_PHRASES
    check_tickers: bool = True
    _segment_re: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        names = "|".join(re.escape(t) for t in self.segment_tokens) or r"(?!x)x"
        # conservative: only flag tokens used as a field name, e.g. `close`,
        # "volume" column, open: 10.2, high field
        pattern = (
            rf"[`'\"]({names})[`'\"]"
            rf"|\b({names})\b\s*(?:column|field|segment|value)s?\b"
            rf"|\b({names})\b\s*[:=]"
        )
        object.__setattr__(self, "_segment_re", re.compile(pattern, re.IGNORECASE))

    def check(self, text: str, stage: str, role: str = "answer") -> None:
        if self.check_tickers:
            m = TICKER_RE.search(text)
            if m:
                raise ContentViolation("ticker", m.group(0))
        if stage == INSTRUCT and role == "answer":
            lowered = text.lower()
            for phrase in self.leakage_phrases:
                if phrase.lower() in lowered:
                    raise ContentViolation("leakage", phrase)
        m = self._segment_re.search(text)
        if m:
            raise ContentViolation("segment-name", m.group(0))


DEFAULT_FILTER = ContentFilter()


def validate_content(text: str, stage: str, role: str = "answer", filt: ContentFilter = DEFAULT_FILTER) -> None:
    """Raise :class:`ContentViolation` if ``text`` breaks a content rule.

    Checks, in order: bare six-digit ticker codes; for instruction answers,
    phrases revealing the hidden future segment; data-segment names used as
    field references.
    """
    filt.check(text, stage, role)


def parse_pretrain_answer(raw: str, filt: ContentFilter = DEFAULT_FILTER) -> str:
    text = raw.strip()
    if not text:
        raise EmptyAnswer("empty pre-training answer")
    validate_content(text, PRETRAIN, "answer", filt)
    return text


def split_dialog(raw: str) -> list[tuple[str, str]]:
    fields = raw.replace(FULLWIDTH_SEPARATOR, SEPARATOR).split(SEPARATOR)
    if fields and not fields[-1].strip():
        fields.pop()
    if len(fields) % 2:
        raise UnpairedSegments(f"{len(fields)} fields cannot be paired into question/answer turns")
    return [(fields[i].strip(), fields[i + 1].strip()) for i in range(0, len(fields), 2)]


def parse_instruct_dialog(
    raw: str,
    filt: ContentFilter = DEFAULT_FILTER,
    min_turns: int = MIN_TURNS,
    max_turns: int = MAX_TURNS,
) -> list[DialogTurn]:
    """Split ``Q@A@Q@A@...`` into turns and validate each one.

    A single trailing separator is optional. Full-width separators are
    folded to ``@`` first.
    """
    if not raw.strip():
        raise EmptyAnswer("response is blank")
    pairs = split_dialog(raw)
    for q, a in pairs:
        if not q or not a:
            raise EmptyAnswer("empty question or answer in dialog")
    if not min_turns <= len(pairs) <= max_turns:
        raise TurnCountOutOfRange(len(pairs), min_turns, max_turns)
    turns = []
    for q, a in pairs:
        validate_content(q, INSTRUCT, "question", filt)
        validate_content(a, INSTRUCT, "answer", filt)
        turns.append(DialogTurn(q, a))
    return turns


def join_dialog(turns: list[DialogTurn]) -> str:
    return "".join(f"{t.question}{SEPARATOR}{t.answer}{SEPARATOR}" for t in turns)
