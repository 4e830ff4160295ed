"""Build both annotation requests for one window and run them through the mock.

No network is touched: the mock backend writes its answers from the bars
embedded in each request.
"""

from __future__ import annotations

from kline_corpus.annotate import MockBackend, annotate
from kline_corpus.parsing import parse_instruct_dialog, parse_pretrain_answer
from kline_corpus.prompting import build_instruct_request, build_pretrain_request
from kline_corpus.sampling import Window
from kline_corpus.synthetic import random_walk_bars
from kline_corpus.trend import trend_label


def main() -> None:
    bars = random_walk_bars(70, seed=12)
    window = Window("sym_demo", 0, 70, 50)
    known, future = bars[:50], bars[50:]

    pre = build_pretrain_request(window, known, "demo-pre")
    print("pretrain user turn (first three lines):")
    print("  " + "\n  ".join(pre.user_content.splitlines()[:3]))

    backend = MockBackend()
    answer = parse_pretrain_answer(annotate(pre, backend).raw_text)
    print(f"\npretrain answer, {len(answer.split())} words:\n{answer[:300]}...\n")

    ins = build_instruct_request(window, known, future, "demo-ins")
    turns = parse_instruct_dialog(annotate(ins, backend).raw_text)
    print(f"instruction dialog with {len(turns)} turns:")
    for t in turns:
        print(f"  Q: {t.question}\n  A: {t.answer}")

    label = trend_label(future)
    print(f"\nheld-out segment: {label.direction} ({float(label.magnitude):+.2%})")


if __name__ == "__main__":
    main()
