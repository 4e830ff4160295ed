"""Embedded 5x7 bitmap glyphs for axis labels.

Only the characters needed for dates and prices are defined. Using our own
glyphs keeps rendering byte-identical regardless of installed fonts.
"""

from __future__ import annotations

GLYPH_W = 5
GLYPH_H = 7
ADVANCE = GLYPH_W + 1

_GLYPHS = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11110", "00001", "00001", "01110", "00001", "00001", "11110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
    ".": ("00000", "00000", "00000", "00000", "00000", "01100", "01100"),
    "-": ("00000", "00000", "00000", "11111", "00000", "00000", "00000"),
    " ": ("00000",) * 7,
}


def text_width(text: str) -> int:
    return max(len(text) * ADVANCE - 1, 0)


def glyph_pixels(text: str, x: int, y: int):
    """Yield (x, y) for every lit pixel of ``text`` with its top-left at (x, y)."""
    for i, ch in enumerate(text):
        rows = _GLYPHS.get(ch)
        if rows is None:
            raise ValueError(f"no glyph for {ch!r}")
        ox = x + i * ADVANCE
        for dy, row in enumerate(rows):
            for dx, bit in enumerate(row):
                if bit == "1":
                    yield ox + dx, y + dy
