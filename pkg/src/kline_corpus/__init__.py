"""Build chart-image instruction-tuning corpora from daily OHLCV history."""

from .annotate import AnnotationResponse, ChatCompletionBackend, MockBackend, RetryPolicy, annotate, annotate_batch
from .dataset import DatasetRecord, DatasetStats, assemble_record, compute_stats, format_stats_table, write_corpus
from .market_data import OhlcvBar, Series, anonymize, load_series
from .parsing import DialogTurn, parse_instruct_dialog, parse_pretrain_answer, validate_content
from .pipeline import PipelineConfig, load_config, run_pipeline, validate_corpus
from .prompting import AnnotationRequest, build_instruct_request, build_pretrain_request, serialize_kline
from .render import RenderedChart, moving_average, render
from .sampling import ChartSpec, Plan, SamplerConfig, Window, plan_corpus, sample_chart_spec, sample_window
from .trend import TrendLabel, score_directions, trend_label

__version__ = "0.1.0"
