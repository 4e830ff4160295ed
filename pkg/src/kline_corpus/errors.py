"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class KlineCorpusError(Exception):
    """Base class for all errors raised by this package."""


# ingest
class FileUnreadable(KlineCorpusError):
    pass


class MalformedRow(KlineCorpusError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptySeries(KlineCorpusError):
    pass


class RejectionRateExceeded(KlineCorpusError):
    pass


# sampling
class SeriesTooShort(KlineCorpusError):
    pass


class NoEligibleSeries(KlineCorpusError):
    pass


# rendering
class EmptyPromptSegment(KlineCorpusError):
    pass


class RenderBackendFailure(KlineCorpusError):
    pass


# prompts
class EmptyBars(KlineCorpusError):
    pass


class KlineParseError(KlineCorpusError):
    pass


class TemplateTampered(KlineCorpusError):
    pass


# annotation
class AnnotationError(KlineCorpusError):
    """A single request could not be annotated."""


class BackendExhausted(AnnotationError):
    pass


class AuthFailure(AnnotationError):
    pass


class EmptyCompletion(AnnotationError):
    pass


class TransientBackendError(AnnotationError):
    """Retryable transport or rate-limit failure."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


# response parsing
class ResponseParseError(KlineCorpusError):
    """A backend response failed format or content checks."""


class EmptyAnswer(ResponseParseError):
    pass


class UnpairedSegments(ResponseParseError):
    pass


class TurnCountOutOfRange(ResponseParseError):
    def __init__(self, count: int, low: int, high: int):
        super().__init__(f"{count} turns, expected {low}-{high}")
        self.count = count


class ContentViolation(ResponseParseError):
    def __init__(self, reason: str, span: str = ""):
        super().__init__(f"{reason}: {span!r}" if span else reason)
        self.reason = reason
        self.span = span


# dataset
class IdMismatch(KlineCorpusError):
    pass


class InvariantViolation(KlineCorpusError):
    pass


class IoFailure(KlineCorpusError):
    pass


class DanglingImagePath(KlineCorpusError):
    def __init__(self, record_id: str, path: str):
        super().__init__(f"record {record_id}: image {path} does not exist")
        self.record_id = record_id
        self.path = path


class EmptyCorpus(KlineCorpusError):
    pass


# trend evaluation
class EmptySegment(KlineCorpusError):
    pass


class LengthMismatch(KlineCorpusError):
    pass


# orchestration
class ConfigInvalid(KlineCorpusError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ManifestMissing(KlineCorpusError):
    pass
