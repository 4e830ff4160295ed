"""Render the same 60 trading days in several chart specs and save the PNGs.

    python demos/02_render_charts.py [out_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from kline_corpus.render import render
from kline_corpus.sampling import ChartSpec
from kline_corpus.synthetic import random_walk_bars

SPECS = {
    "candles_ma_volume": ChartSpec("candlestick", "light", (3, 6, 9), True),
    "candles_dark": ChartSpec("candlestick", "dark", (6,), False),
    "line_plain": ChartSpec("line", "print", (), False),
    "line_ma_volume": ChartSpec("line", "muted", (3, 9), True, 800, 600),
}


def main(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    bars = random_walk_bars(60, seed=5)
    for name, spec in SPECS.items():
        chart = render(None, bars, spec)
        path = out_dir / f"{name}.png"
        path.write_bytes(chart.png_bytes)
        # Byte-identical output means the hash doubles as a regression check.
        print(f"{path}  {spec.width_px}x{spec.height_px}  sha256={chart.content_hash[:16]}...")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo_charts"))
