"""Command line entry point: ``kline-corpus generate|stats|validate|eval-trend``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataset
from .errors import KlineCorpusError
from .pipeline import load_config, run_pipeline, validate_corpus
from .prompting import INSTRUCT
from .trend import TrendLabel, read_predictions, score_directions


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def cmd_generate(args) -> int:
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out_dir:
        overrides.append(f"out_dir={json.dumps(args.out_dir)}")
    if args.input:
        overrides.append(f"inputs={json.dumps(args.input)}")
    if args.stage:
        overrides.append(f"stage={json.dumps(args.stage)}")
    cfg = load_config(args.config, overrides)
    status, manifest = run_pipeline(cfg)
    _print_json({"status": status, "counts": manifest.get("counts"), "errors": manifest.get("errors")})
    return status


def cmd_stats(args) -> int:
    records = dataset.load_records(args.out_dir)
    stats = dataset.compute_stats(records)
    sys.stdout.write(dataset.stats_csv(stats) if args.csv else dataset.format_stats_table(stats))
    return 0


def cmd_validate(args) -> int:
    report = validate_corpus(args.out_dir)
    _print_json(report)
    return 0 if report["ok"] else 1


def cmd_eval_trend(args) -> int:
    records = [r for r in dataset.load_records(args.out_dir) if r.stage == INSTRUCT]
    preds = read_predictions(args.predictions)
    truth = [TrendLabel.from_json(r.meta["trend"]) for r in records]
    report = score_directions([preds.get(r.id) for r in records], truth)
    if args.output:
        Path(args.output).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    _print_json(report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kline-corpus", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="build or resume a corpus")
    g.add_argument("--config", help="TOML config file")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir")
    g.add_argument("--input", action="append", help="ingest CSV (repeatable)")
    g.add_argument("--stage", choices=("pretrain", "instruct", "both"))
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. sampling.p_ma=0.3")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="print word/turn statistics of a corpus")
    s.add_argument("out_dir")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_stats)

    v = sub.add_parser("validate", help="re-check records, images and stats")
    v.add_argument("out_dir")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("eval-trend", help="score extracted direction predictions")
    e.add_argument("out_dir")
    e.add_argument("predictions", help="CSV of record_id,direction")
    e.add_argument("--output", help="write the JSON report here as well")
    e.set_defaults(func=cmd_eval_trend)
    return parser


def _configure_logging(verbose: bool) -> None:
    log = logging.getLogger("kline_corpus")
    for h in [h for h in log.handlers if getattr(h, "_cli", False)]:
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._cli = True
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except KlineCorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
