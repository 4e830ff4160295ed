"""Seeded sampling of prompt/predict windows and randomized chart specs."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalid, NoEligibleSeries, SeriesTooShort
from .market_data import OhlcvBar, Series

CANDLESTICK = "candlestick"
LINE = "line"
STYLES = ("light", "dark", "high-contrast", "muted", "print")
MA_PERIODS = (3, 6, 9)


@dataclass(frozen=True)
class SamplerConfig:
    """Every sampling constant, defaulted to the published dataset recipe."""

    min_len: int = 60
    max_len: int = 80
    min_prompt_frac: float = 0.6
    max_prompt_frac: float = 0.8
    p_candlestick: float = 0.8
    p_ma: float = 0.5
    p_volume: float = 0.5
    ma_periods: tuple[int, ...] = MA_PERIODS
    styles: tuple[str, ...] = STYLES
    width_px: int = 640
    height_px: int = 480

    def __post_init__(self):
        for name in ("p_candlestick", "p_ma", "p_volume", "min_prompt_frac", "max_prompt_frac"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigInvalid(name, f"{value} not in [0, 1]")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigInvalid("min_len", "need 1 <= min_len <= max_len")
        if self.min_prompt_frac > self.max_prompt_frac:
            raise ConfigInvalid("min_prompt_frac", "exceeds max_prompt_frac")
        if not set(self.ma_periods) <= set(MA_PERIODS):
            raise ConfigInvalid("ma_periods", f"must be a subset of {MA_PERIODS}")
        if not self.styles or not set(self.styles) <= set(STYLES):
            raise ConfigInvalid("styles", f"must be a non-empty subset of {STYLES}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ConfigInvalid("width_px", "image size must be positive")


@dataclass(frozen=True)
class Window:
    symbol_id: str
    start: int
    total_len: int
    prompt_len: int

    @property
    def predict_len(self) -> int:
        return self.total_len - self.prompt_len

    @property
    def prompt_fraction(self) -> float:
        return self.prompt_len / self.total_len

    def prompt_bars(self, series: Series) -> list[OhlcvBar]:
        return list(series.bars[self.start : self.start + self.prompt_len])

    def predict_bars(self, series: Series) -> list[OhlcvBar]:
        return list(series.bars[self.start + self.prompt_len : self.start + self.total_len])


@dataclass(frozen=True)
class ChartSpec:
    chart_type: str
    style_id: str
    ma_periods: tuple[int, ...]
    show_volume: bool
    width_px: int = 640
    height_px: int = 480
    seed: int = 0

    def summary(self) -> dict:
        return {
            "chart_type": self.chart_type,
            "style": self.style_id,
            "ma": list(self.ma_periods),
            "volume": self.show_volume,
            "size": [self.width_px, self.height_px],
        }


@dataclass(frozen=True)
class Plan:
    record_id: str
    window: Window
    spec: ChartSpec


def prompt_len_bounds(total_len: int, cfg: SamplerConfig) -> tuple[int, int]:
    low = math.ceil(cfg.min_prompt_frac * total_len - 1e-9)
    high = math.floor(cfg.max_prompt_frac * total_len + 1e-9)
    return low, min(high, total_len - 1)


def sample_window(series: Series, rng: np.random.Generator, cfg: SamplerConfig = SamplerConfig()) -> Window:
    """Draw one window from ``series``.

    Length is uniform on ``[min_len, max_len]`` (clamped to what the series
    holds), the start is uniform over feasible positions, and the prompt
    length is ``round(f * total_len)`` with ``f`` uniform on the prompt
    fraction range, clamped so the fraction bounds hold exactly after rounding.
    """
    n = len(series)
    if n < cfg.min_len:
        raise SeriesTooShort(f"series {series.symbol_id} has {n} bars, need {cfg.min_len}")
    total_len = min(int(rng.integers(cfg.min_len, cfg.max_len + 1)), n)
    start = int(rng.integers(0, n - total_len + 1))
    frac = float(rng.uniform(cfg.min_prompt_frac, cfg.max_prompt_frac))
    low, high = prompt_len_bounds(total_len, cfg)
    prompt_len = min(max(round(frac * total_len), low), high)
    return Window(series.symbol_id, start, total_len, prompt_len)


def sample_chart_spec(rng: np.random.Generator, cfg: SamplerConfig = SamplerConfig()) -> ChartSpec:
    # draw order is part of the determinism contract; do not reorder
    chart_type = CANDLESTICK if rng.random() < cfg.p_candlestick else LINE
    ma = tuple(k for k in MA_PERIODS if rng.random() < cfg.p_ma and k in cfg.ma_periods)
    show_volume = bool(rng.random() < cfg.p_volume)
    style = cfg.styles[int(rng.integers(0, len(cfg.styles)))]
    seed = int(rng.integers(0, 2**64, dtype=np.uint64))
    return ChartSpec(chart_type, style, ma, show_volume, cfg.width_px, cfg.height_px, seed)


def record_id(window: Window, spec: ChartSpec) -> str:
    key = f"{window.symbol_id}|{window.start}|{window.total_len}|{window.prompt_len}|{spec.seed}"
    return hashlib.sha256(key.encode()).hexdigest()[:20]


def plan_corpus(
    series_list: list[Series],
    target_count: int,
    rng: np.random.Generator,
    cfg: SamplerConfig = SamplerConfig(),
) -> list[Plan]:
    """``target_count`` plans, round-robin over series long enough to sample."""
    eligible = [s for s in series_list if len(s) >= cfg.min_len]
    if target_count <= 0:
        return []
    if not eligible:
        raise NoEligibleSeries(f"no series with at least {cfg.min_len} bars")
    plans = []
    seen: set[str] = set()
    for i in range(target_count):
        window = sample_window(eligible[i % len(eligible)], rng, cfg)
        spec = sample_chart_spec(rng, cfg)
        rid = record_id(window, spec)
        if rid in seen:
            raise RuntimeError(f"record id collision: {rid}")
        seen.add(rid)
        plans.append(Plan(rid, window, spec))
    return plans
