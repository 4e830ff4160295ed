"""Deterministic PNG rendering of k-line (candlestick) and line charts.

Everything is drawn with aliased Pillow primitives at integer coordinates and
labelled with the embedded bitmap font, so identical inputs always produce
identical bytes.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from PIL import Image, ImageDraw

from . import _font
from .errors import EmptyPromptSegment, RenderBackendFailure
from .market_data import OhlcvBar
from .sampling import CANDLESTICK, LINE, ChartSpec, Window

PNG_COMPRESS_LEVEL = 6
VOLUME_PANEL_FRACTION = 0.2
MARGIN = 10
AXIS_W = 62
AXIS_H = 16
PRICE_TICKS = 5


@dataclass(frozen=True)
class Style:
    background: tuple
    foreground: tuple
    grid: tuple
    grid_mode: str  # "solid" | "dotted" | "none"
    up: tuple
    down: tuple
    line: tuple
    ma: dict


_MA_DEFAULT = {3: (255, 152, 0), 6: (66, 133, 244), 9: (171, 71, 188)}

STYLE_TABLE = {
    "light": Style((255, 255, 255), (40, 40, 40), (225, 225, 225), "solid",
                   (214, 39, 40), (44, 160, 44), (31, 119, 180), _MA_DEFAULT),
    "dark": Style((17, 17, 17), (220, 220, 220), (55, 55, 55), "solid",
                  (239, 83, 80), (38, 166, 154), (100, 181, 246),
                  {3: (255, 213, 79), 6: (129, 199, 132), 9: (206, 147, 216)}),
    "high-contrast": Style((255, 255, 255), (0, 0, 0), (160, 160, 160), "dotted",
                           (255, 0, 0), (0, 128, 0), (0, 0, 255),
                           {3: (255, 140, 0), 6: (0, 170, 255), 9: (200, 0, 200)}),
    "muted": Style((246, 244, 240), (90, 90, 90), (230, 226, 218), "none",
                   (196, 120, 110), (120, 160, 130), (110, 130, 160),
                   {3: (200, 170, 110), 6: (140, 150, 190), 9: (170, 130, 170)}),
    "print": Style((255, 255, 255), (0, 0, 0), (200, 200, 200), "dotted",
                   (120, 120, 120), (20, 20, 20), (60, 60, 60),
                   {3: (150, 150, 150), 6: (90, 90, 90), 9: (180, 180, 180)}),
}


@dataclass(frozen=True)
class RenderedChart:
    png_bytes: bytes
    content_hash: str
    spec: ChartSpec
    bar_count: int


@dataclass(frozen=True)
class Layout:
    """Pixel boxes of the price and (optional) volume panels, inclusive."""

    left: int
    right: int
    price_top: int
    price_bottom: int
    volume_top: int | None
    volume_bottom: int | None


def moving_average(closes: Sequence, k: int) -> list[Fraction | None]:
    """Trailing k-period arithmetic mean; ``None`` until k values are available.

    Computed in exact rational arithmetic so that shifting every close by a
    constant shifts every defined average by exactly that constant.
    """
    if k < 1:
        raise ValueError(f"period must be positive, got {k}")
    values = [Fraction(c) for c in closes]
    out: list[Fraction | None] = [None] * len(values)
    running = Fraction(0)
    for i, v in enumerate(values):
        running += v
        if i >= k:
            running -= values[i - k]
        if i >= k - 1:
            out[i] = running / k
    return out


def layout_for(spec: ChartSpec) -> Layout:
    w, h = spec.width_px, spec.height_px
    left, right = MARGIN, w - AXIS_W
    if spec.show_volume:
        volume_top = h - round(h * VOLUME_PANEL_FRACTION)
        return Layout(left, right, MARGIN, volume_top - 6, volume_top, h - AXIS_H)
    return Layout(left, right, MARGIN, h - AXIS_H, None, None)


def _draw_text(draw: ImageDraw.ImageDraw, text: str, x: int, y: int, color) -> None:
    for px, py in _font.glyph_pixels(text, x, y):
        draw.point((px, py), fill=color)


def _hline(draw, x0, x1, y, color, mode):
    if mode == "solid":
        draw.line([(x0, y), (x1, y)], fill=color)
    elif mode == "dotted":
        draw.point([(x, y) for x in range(x0, x1 + 1, 3)], fill=color)


def _vline(draw, x, y0, y1, color, mode):
    if mode == "solid":
        draw.line([(x, y0), (x, y1)], fill=color)
    elif mode == "dotted":
        draw.point([(x, y) for y in range(y0, y1 + 1, 3)], fill=color)


def _draw(bars: Sequence[OhlcvBar], spec: ChartSpec) -> Image.Image:
    style = STYLE_TABLE[spec.style_id]
    lay = layout_for(spec)
    img = Image.new("RGB", (spec.width_px, spec.height_px), style.background)
    draw = ImageDraw.Draw(img)
    n = len(bars)

    closes = [b.close for b in bars]
    overlays = {k: moving_average(closes, k) for k in spec.ma_periods}
    if spec.chart_type == CANDLESTICK:
        lo = float(min(b.low for b in bars))
        hi = float(max(b.high for b in bars))
    else:
        lo, hi = float(min(closes)), float(max(closes))
    for series in overlays.values():
        defined = [float(v) for v in series if v is not None]
        if defined:
            lo, hi = min(lo, min(defined)), max(hi, max(defined))
    pad = (hi - lo) * 0.05 or max(hi * 0.01, 0.01)
    lo, hi = lo - pad, hi + pad

    top, bottom = lay.price_top, lay.price_bottom
    slot = (lay.right - lay.left) / n

    def xc(i: int) -> int:
        return lay.left + int((i + 0.5) * slot)

    def yp(price) -> int:
        return top + round((hi - float(price)) / (hi - lo) * (bottom - top))

    # grid and axis labels
    for t in range(PRICE_TICKS):
        price = lo + (hi - lo) * (t + 0.5) / PRICE_TICKS
        y = yp(price)
        _hline(draw, lay.left, lay.right, y, style.grid, style.grid_mode)
        _draw_text(draw, f"{price:.2f}", lay.right + 6, y - _font.GLYPH_H // 2, style.foreground)
    label_idx = sorted({0, n // 2, n - 1})
    for i in label_idx:
        x = xc(i)
        _vline(draw, x, top, bottom, style.grid, style.grid_mode)
        text = bars[i].date.isoformat()
        tx = min(max(x - _font.text_width(text) // 2, 0), spec.width_px - _font.text_width(text) - 1)
        _draw_text(draw, text, tx, spec.height_px - AXIS_H + 5, style.foreground)
    draw.rectangle([lay.left, top, lay.right, bottom], outline=style.foreground)

    if spec.chart_type == CANDLESTICK:
        body = max(1, int(slot * 0.7))
        for i, b in enumerate(bars):
            x = xc(i)
            color = style.up if b.close >= b.open else style.down
            draw.line([(x, yp(b.high)), (x, yp(b.low))], fill=color)
            y0, y1 = sorted((yp(b.open), yp(b.close)))
            x0 = x - body // 2
            draw.rectangle([x0, y0, x0 + body - 1, y1], fill=color)
    elif spec.chart_type == LINE:
        points = [(xc(i), yp(c)) for i, c in enumerate(closes)]
        if len(points) == 1:
            draw.point(points, fill=style.line)
        else:
            draw.line(points, fill=style.line)
    else:
        raise RenderBackendFailure(f"unknown chart type {spec.chart_type!r}")

    for k in sorted(overlays):
        pts = [(xc(i), yp(v)) for i, v in enumerate(overlays[k]) if v is not None]
        if len(pts) > 1:
            draw.line(pts, fill=style.ma[k])
        elif pts:
            draw.point(pts, fill=style.ma[k])

    if lay.volume_top is not None:
        vtop, vbottom = lay.volume_top, lay.volume_bottom
        vmax = max(b.volume for b in bars) or 1
        body = max(1, int(slot * 0.7))
        for i, b in enumerate(bars):
            if b.volume == 0:
                continue
            x0 = xc(i) - body // 2
            height = round(b.volume / vmax * (vbottom - vtop))
            color = style.up if b.close >= b.open else style.down
            draw.rectangle([x0, vbottom - height, x0 + body - 1, vbottom], fill=color)
        draw.rectangle([lay.left, vtop, lay.right, vbottom], outline=style.foreground)
    return img


def encode_png(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    # no pnginfo: Pillow then writes only IHDR/IDAT/IEND, no timestamps
    img.save(buf, format="PNG", compress_level=PNG_COMPRESS_LEVEL, optimize=False)
    return buf.getvalue()


def render(window: Window | None, prompt_bars: Sequence[OhlcvBar], spec: ChartSpec) -> RenderedChart:
    """Draw the prompt segment of a window according to ``spec``."""
    if not prompt_bars:
        raise EmptyPromptSegment("no bars to render")
    if window is not None and len(prompt_bars) != window.prompt_len:
        raise ValueError(f"got {len(prompt_bars)} bars for a prompt segment of {window.prompt_len}")
    if spec.style_id not in STYLE_TABLE:
        raise RenderBackendFailure(f"unknown style {spec.style_id!r}")
    try:
        png = encode_png(_draw(prompt_bars, spec))
    except (OSError, ValueError) as exc:
        raise RenderBackendFailure(str(exc)) from exc
    return RenderedChart(png, hashlib.sha256(png).hexdigest(), spec, len(prompt_bars))
