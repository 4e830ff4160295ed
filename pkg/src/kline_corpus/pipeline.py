"""End-to-end corpus generation: ingest, plan, annotate, parse, render, write."""

from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dataset, prompting
from .annotate import ChatCompletionBackend, MockBackend, RetryPolicy, annotate_batch
from .errors import (
    AnnotationError,
    AuthFailure,
    ConfigInvalid,
    ContentViolation,
    KlineCorpusError,
    ManifestMissing,
    ResponseParseError,
)
from .market_data import IngestFormat, LoadReport, Series, load_series, write_symbol_map
from .parsing import ContentFilter, parse_instruct_dialog, parse_pretrain_answer
from .prompting import INSTRUCT, PRETRAIN
from .render import render
from .sampling import Plan, SamplerConfig, plan_corpus
from .trend import trend_label

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
STAGES = ("pretrain", "instruct", "both")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.7
    mock_fault_rate: float = 0.0


@dataclass(frozen=True)
class FilterConfig:
    segment_tokens: tuple[str, ...] = ContentFilter.segment_tokens
    leakage_phrases: tuple[str, ...] = ContentFilter.leakage_phrases
    check_tickers: bool = True

    def build(self) -> ContentFilter:
        return ContentFilter(tuple(self.segment_tokens), tuple(self.leakage_phrases), self.check_tickers)


@dataclass(frozen=True)
class IngestConfig:
    salt: str = IngestFormat.salt
    max_reject_rate: float = IngestFormat.max_reject_rate
    symbol_map: str = ""


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    inputs: tuple[str, ...] = ()
    out_dir: str = "corpus"
    stage: str = "both"
    pretrain_count: int = 100
    instruct_count: int = 100
    epsilon: str = "0.005"
    lang: str = "en"
    max_in_flight: int = 4
    render_workers: int = 4
    checkpoint_every: int = 50
    sampling: SamplerConfig = field(default_factory=SamplerConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    filter: FilterConfig = field(default_factory=FilterConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigInvalid("seed", "a non-negative integer seed is required")
        if self.stage not in STAGES:
            raise ConfigInvalid("stage", f"must be one of {STAGES}")
        for name in ("pretrain_count", "instruct_count"):
            if getattr(self, name) < 0:
                raise ConfigInvalid(name, "must be >= 0")
        for name in ("max_in_flight", "render_workers", "checkpoint_every"):
            if getattr(self, name) < 1:
                raise ConfigInvalid(name, "must be >= 1")
        try:
            if Fraction(self.epsilon) < 0:
                raise ConfigInvalid("epsilon", "must be >= 0")
        except ValueError:
            raise ConfigInvalid("epsilon", f"not a number: {self.epsilon!r}") from None
        if self.backend.kind not in ("mock", "chat"):
            raise ConfigInvalid("backend.kind", "must be 'mock' or 'chat'")
        if not 0.0 <= self.backend.mock_fault_rate <= 1.0:
            raise ConfigInvalid("backend.mock_fault_rate", "not in [0, 1]")
        if not 0.0 <= self.ingest.max_reject_rate <= 1.0:
            raise ConfigInvalid("ingest.max_reject_rate", "not in [0, 1]")

    @property
    def counts(self) -> dict[str, int]:
        return {
            PRETRAIN: self.pretrain_count if self.stage in ("pretrain", "both") else 0,
            INSTRUCT: self.instruct_count if self.stage in ("instruct", "both") else 0,
        }

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        data = self.to_dict()
        data.pop("out_dir")
        canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


_SECTIONS = {
    "sampling": SamplerConfig,
    "backend": BackendConfig,
    "retry": RetryPolicy,
    "filter": FilterConfig,
    "ingest": IngestConfig,
}


def _build(cls, data: dict, prefix: str = ""):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigInvalid(prefix + sorted(unknown)[0], "unknown key")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is PipelineConfig:
            if not isinstance(value, dict):
                raise ConfigInvalid(key, "expected a table")
            value = _build(_SECTIONS[key], value, prefix=f"{key}.")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigInvalid as exc:
        if prefix and not exc.field.startswith(prefix):
            raise ConfigInvalid(prefix + exc.field, exc.reason) from None
        raise
    except TypeError as exc:
        raise ConfigInvalid(prefix or "config", str(exc)) from exc


def config_from_dict(data: dict) -> PipelineConfig:
    if "seed" not in data:
        raise ConfigInvalid("seed", "missing; runs must be explicitly seeded")
    return _build(PipelineConfig, data)


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=value`` overrides; values are read as TOML literals."""
    data = json.loads(json.dumps(data))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigInvalid(item, "override must look like key=value")
        *parents, leaf = key.strip().split(".")
        node = data
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = _parse_value(raw.strip())
    return data


def load_config(path: str | Path | None, overrides: list[str] = ()) -> PipelineConfig:
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    return config_from_dict(apply_overrides(data, list(overrides)))


def make_backend(cfg: PipelineConfig):
    b = cfg.backend
    if b.kind == "mock":
        return MockBackend(epsilon=cfg.epsilon, fault_rate=b.mock_fault_rate)
    return ChatCompletionBackend(b.endpoint, b.model, b.api_key_env, b.temperature)


# --------------------------------------------------------------------------


@dataclass
class _RunState:
    records: dict[str, dataset.DatasetRecord] = field(default_factory=dict)
    accepted_ids: set[str] = field(default_factory=set)
    rejected_ids: set[str] = field(default_factory=set)
    accepted: int = 0
    rejected: int = 0
    skipped: int = 0
    backend_failures: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)


def _load_inputs(cfg: PipelineConfig) -> list[Series]:
    fmt = IngestFormat(salt=cfg.ingest.salt, max_reject_rate=cfg.ingest.max_reject_rate)
    series, mapping = [], {}
    for path in cfg.inputs:
        report = LoadReport()
        loaded = load_series(path, fmt, report=report)
        if report.rejected:
            logger.warning("%s: %d of %d rows rejected", path, len(report.rejected), report.rows)
        series += loaded
        mapping.update(report.ticker_map)
    ids = [s.symbol_id for s in series]
    if len(ids) != len(set(ids)):
        raise ConfigInvalid("inputs", "the same symbol appears in more than one input file")
    if cfg.ingest.symbol_map:
        write_symbol_map(mapping, cfg.ingest.symbol_map)
    return series


def _plans(cfg: PipelineConfig, series: list[Series]) -> list[tuple[str, Plan]]:
    rng = np.random.default_rng(cfg.seed)
    out = []
    for stage, count in cfg.counts.items():
        out += [(stage, p) for p in plan_corpus(series, count, rng, cfg.sampling)]
    ids = [p.record_id for _, p in out]
    if len(ids) != len(set(ids)):
        raise KlineCorpusError("record id collision across stages")
    return out


def _request(stage: str, plan: Plan, s: Series, lang: str):
    w = plan.window
    if stage == PRETRAIN:
        return prompting.build_pretrain_request(w, w.prompt_bars(s), plan.record_id, lang)
    return prompting.build_instruct_request(w, w.prompt_bars(s), w.predict_bars(s), plan.record_id, lang)


def _write_reject(out_dir: Path, rid: str, stage: str, reason: str, error: str, raw: str | None) -> None:
    payload = {"id": rid, "stage": stage, "reason": reason, "error": error, "raw_text": raw}
    dataset.atomic_write(out_dir / "rejects" / f"{rid}.json", dataset.dump_json(payload))


def _reason(exc: Exception) -> str:
    if isinstance(exc, ContentViolation):
        return f"content:{exc.reason}"
    return type(exc).__name__


def _manifest(cfg, state: _RunState, plans, complete: bool, backend) -> dict:
    templates = {
        f"{cfg.lang}/{name}": prompting.template_sha256(name, cfg.lang)
        for name in ("pretrain.txt", "instruct.txt", "instructions.txt")
    }
    plan_order = [p.record_id for _, p in plans]
    return {
        "format_version": MANIFEST_VERSION,
        "complete": complete,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "templates": templates,
        "backend": {
            "id": backend.backend_id,
            "model": cfg.backend.model if cfg.backend.kind == "chat" else None,
            "temperature": cfg.backend.temperature,
        },
        "counts": {
            "planned": len(plans),
            "accepted": state.accepted,
            "rejected": state.rejected,
            "skipped": state.skipped,
            "backend_failures": state.backend_failures,
        },
        "rejections": dict(sorted(state.reasons.items())),
        "completed": {
            "accepted": [r for r in plan_order if r in state.accepted_ids],
            "rejected": [r for r in plan_order if r in state.rejected_ids],
        },
        "errors": state.errors,
        "notes": {
            "prices": "as given by the input files; no split or dividend adjustment",
            "moving_average": "close-based",
            "original_annotator_model": "unknown",
            "trend_epsilon": cfg.epsilon,
        },
    }


def _checkpoint(out_dir: Path, cfg, state: _RunState, plans, complete: bool, backend) -> dict:
    ordered = [state.records[p.record_id] for _, p in plans if p.record_id in state.records]
    manifest = dataset.write_corpus(ordered, out_dir, _manifest(cfg, state, plans, complete, backend))
    if ordered:
        stats = dataset.compute_stats(ordered)
        dataset.atomic_write(out_dir / "stats.txt", dataset.format_stats_table(stats))
        dataset.atomic_write(out_dir / "stats.csv", dataset.stats_csv(stats))
    return manifest


def _resume(out_dir: Path, state: _RunState, plan_ids: set[str]) -> None:
    path = out_dir / "manifest.json"
    if not path.exists():
        return
    manifest = json.loads(path.read_text(encoding="utf-8"))
    done = manifest.get("completed", {})
    for rec in dataset.load_records(out_dir):
        if rec.id in plan_ids and rec.id in done.get("accepted", []) and (out_dir / rec.image).is_file():
            state.records[rec.id] = rec
            state.accepted_ids.add(rec.id)
    state.rejected_ids.update(r for r in done.get("rejected", []) if r in plan_ids)


def run_pipeline(cfg: PipelineConfig, backend=None) -> tuple[int, dict]:
    """Generate (or resume) a corpus under ``cfg.out_dir``.

    Returns ``(exit_status, manifest)``; the status is non-zero only when a
    stage aborted. Plans whose record id is already listed as completed in an
    existing manifest are skipped, so an interrupted run can simply be rerun.
    """
    out_dir = Path(cfg.out_dir)
    backend = backend or make_backend(cfg)
    state = _RunState()
    try:
        series = _load_inputs(cfg)
        plans = _plans(cfg, series)
    except KlineCorpusError as exc:
        logger.error("ingest/planning aborted: %s", exc)
        state.errors.append(f"{type(exc).__name__}: {exc}")
        return 1, {"complete": False, "errors": state.errors}

    by_id = {s.symbol_id: s for s in series}
    filt = cfg.filter.build()
    pool = prompting.instruction_pool(cfg.lang)
    epsilon = Fraction(cfg.epsilon)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)

    _resume(out_dir, state, {p.record_id for _, p in plans})
    done = state.accepted_ids | state.rejected_ids
    pending = [(st, p) for st, p in plans if p.record_id not in done]
    state.skipped = len(plans) - len(pending)
    logger.info("%d planned, %d already done, %d to annotate", len(plans), state.skipped, len(pending))

    status = 0
    for start in range(0, len(pending), cfg.checkpoint_every):
        chunk = pending[start : start + cfg.checkpoint_every]
        requests = [_request(st, p, by_id[p.window.symbol_id], cfg.lang) for st, p in chunk]
        results = annotate_batch(requests, backend, cfg.retry, cfg.max_in_flight)

        parsed = []
        for (stage, plan), result in zip(chunk, results):
            rid = plan.record_id
            if isinstance(result, AnnotationError):
                state.rejected += 1
                state.backend_failures += 1
                reason = f"backend:{type(result).__name__}"
                state.reasons[reason] = state.reasons.get(reason, 0) + 1
                _write_reject(out_dir, rid, stage, reason, str(result), None)
                if isinstance(result, AuthFailure):
                    state.errors.append(f"AuthFailure: {result}")
                    status = 1
                continue
            try:
                if stage == PRETRAIN:
                    dialog = parse_pretrain_answer(result.raw_text, filt)
                else:
                    dialog = parse_instruct_dialog(result.raw_text, filt)
            except ResponseParseError as exc:
                state.rejected += 1
                state.rejected_ids.add(rid)
                reason = _reason(exc)
                state.reasons[reason] = state.reasons.get(reason, 0) + 1
                _write_reject(out_dir, rid, stage, reason, str(exc), result.raw_text)
                continue
            parsed.append((stage, plan, dialog))

        def build(item):
            stage, plan, dialog = item
            s = by_id[plan.window.symbol_id]
            w = plan.window
            chart = render(w, w.prompt_bars(s), plan.spec)
            (out_dir / dataset.image_relpath(plan.record_id)).write_bytes(chart.png_bytes)
            prompt = w.prompt_bars(s)
            meta = {"date_range": [prompt[0].date.isoformat(), prompt[-1].date.isoformat()]}
            if stage == INSTRUCT:
                predict = w.predict_bars(s)
                meta["predict_range"] = [predict[0].date.isoformat(), predict[-1].date.isoformat()]
                meta["trend"] = trend_label(predict, epsilon).to_json()
                return dataset.assemble_record(plan, chart, dialog, record_id=plan.record_id, meta=meta)
            instruction = dataset.pick_instruction(plan, pool)
            return dataset.assemble_record(plan, chart, dialog, instruction, record_id=plan.record_id, meta=meta)

        with ThreadPoolExecutor(max_workers=cfg.render_workers) as ex:
            built = list(ex.map(build, parsed))
        for rec in built:
            state.records[rec.id] = rec
            state.accepted_ids.add(rec.id)
            state.accepted += 1
            stale = out_dir / "rejects" / f"{rec.id}.json"
            if stale.exists():
                stale.unlink()
        _checkpoint(out_dir, cfg, state, plans, False, backend)
        logger.info("checkpoint: %d/%d annotated", min(start + len(chunk), len(pending)), len(pending))
        if status:
            logger.error("aborting: %s", state.errors[-1])
            break

    return status, _checkpoint(out_dir, cfg, state, plans, status == 0, backend)


# --------------------------------------------------------------------------


def _check_image(out_dir: Path, rec: dataset.DatasetRecord) -> str | None:
    from PIL import Image

    path = out_dir / rec.image
    if not path.is_file():
        return f"missing image {rec.image}"
    data = path.read_bytes()
    expected = rec.meta.get("image_sha256")
    if expected and hashlib.sha256(data).hexdigest() != expected:
        return "image bytes do not match recorded sha256"
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            size = list(img.size)
            fmt = img.format
    except Exception as exc:  # noqa: BLE001 - any decoder failure is a violation
        return f"image does not decode: {exc}"
    if fmt != "PNG":
        return f"image is {fmt}, not PNG"
    want = rec.meta.get("spec", {}).get("size")
    if want and size != list(want):
        return f"image is {size[0]}x{size[1]}, expected {want[0]}x{want[1]}"
    return None


def validate_corpus(out_dir: str | Path) -> dict:
    """Re-check every record, image and the stored statistics of a corpus."""
    out_dir = Path(out_dir)
    mpath = out_dir / "manifest.json"
    if not mpath.exists():
        raise ManifestMissing(f"{mpath} not found")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    records = dataset.load_records(out_dir)
    try:
        filt = FilterConfig(**{k: tuple(v) if isinstance(v, list) else v
                               for k, v in manifest.get("config", {}).get("filter", {}).items()}).build()
    except TypeError:
        filt = ContentFilter()
    violations = []

    def add(rid, kind, detail):
        violations.append({"record": rid, "kind": kind, "detail": detail})

    seen = set()
    for rec in records:
        if rec.id in seen:
            add(rec.id, "duplicate", "record id appears twice")
        seen.add(rec.id)
        for problem in dataset.record_violations(rec):
            add(rec.id, problem.split(":")[0], problem)
        problem = _check_image(out_dir, rec)
        if problem:
            add(rec.id, "image", problem)
        for i, m in enumerate(rec.conversations):
            role = "question" if m.role == dataset.HUMAN else "answer"
            try:
                filt.check(dataset.strip_image_token(m.text), rec.stage, role)
            except ContentViolation as exc:
                add(rec.id, "content", f"message {i}: {exc}")

    listed = set(manifest.get("completed", {}).get("accepted", []))
    for rid in sorted(listed - seen):
        add(rid, "manifest", "listed as accepted but missing from corpus files")
    for rid in sorted(seen - listed):
        add(rid, "manifest", "present in corpus files but not listed in manifest")

    stats_path = out_dir / "stats.csv"
    if records:
        fresh = dataset.stats_csv(dataset.compute_stats(records))
        if not stats_path.exists():
            add(None, "stats", "stats.csv missing")
        elif stats_path.read_text(encoding="utf-8") != fresh:
            add(None, "stats", "stats.csv does not match statistics recomputed from the records")
    return {"out_dir": str(out_dir), "records": len(records), "violations": violations, "ok": not violations}
