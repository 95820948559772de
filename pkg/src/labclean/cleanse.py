"""Staged cleaning pipeline with per-analyte reduction accounting.

Stage order is fixed: only-numericals, not-null, range, then an optional
std-clip. The first two stages are disjoint here (non-numeric strings fall
at stage 1, null tokens at stage 2) so every reject carries exactly one
reason code while the report columns keep the familiar four-count shape.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Callable, Iterable, Iterator

from .schema import (
    MISSING_RANGE,
    Censored,
    CovidEvent,
    CovidStatus,
    Interval,
    LowerOnly,
    Missing,
    MissingRange,
    Numeric,
    Qualitative,
    ReductionRow,
    ReferenceRange,
    TestRecord,
    UpperOnly,
    reduction_pct,
)
from .valueparse import (
    DEFAULT_NULL_VOCAB,
    NullVocabulary,
    ParseMissCounter,
    merge_references,
    parse_reference,
    parse_result,
)

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "RejectReason",
    "RejectedRecord",
    "run_pipeline",
    "range_filter",
    "std_clip",
    "positive_window_filter",
    "reduction_pct",
]


class EmptyInput(ValueError):
    pass


class RejectReason(str, Enum):
    NON_NUMERIC = "NonNumeric"
    NULL_VALUE = "NullValue"
    NO_REFERENCE = "NoReference"
    OUT_OF_RANGE = "OutOfRange"
    STD_OUTLIER = "StdOutlier"


_REASON_STAGE = {
    RejectReason.NON_NUMERIC: "only_numericals",
    RejectReason.NULL_VALUE: "not_null",
    RejectReason.NO_REFERENCE: "range",
    RejectReason.OUT_OF_RANGE: "range",
    RejectReason.STD_OUTLIER: "std_clip",
}


@dataclass
class PipelineConfig:
    # std-clip runs only when a multiplier is set; the reduction table
    # columns cover the first three stages either way.
    std_multiplier: float | None = None
    reference_overrides: dict[str, ReferenceRange] | None = None
    null_vocab: NullVocabulary = DEFAULT_NULL_VOCAB

    def __post_init__(self) -> None:
        if self.std_multiplier is not None and self.std_multiplier <= 0:
            raise ValueError("std_multiplier must be positive")


@dataclass(frozen=True)
class RejectedRecord:
    patient_id: str
    analyte: str
    raw_result: str
    stage: str
    reason: RejectReason


@dataclass
class PipelineResult:
    reduction: list[ReductionRow]
    cleaned: list[TestRecord] | None
    rejects: list[RejectedRecord] | None
    no_reference_analytes: list[str]
    reference_parse_misses: int


def in_envelope(x: float, envelope: ReferenceRange) -> bool:
    """Inclusive-bounds membership; missing envelopes admit nothing."""
    if isinstance(envelope, Interval):
        return envelope.min <= x <= envelope.max
    if isinstance(envelope, LowerOnly):
        return x >= envelope.min
    if isinstance(envelope, UpperOnly):
        return x <= envelope.max
    return False


def range_filter(
    values: list[tuple[TestRecord, float]], envelope: ReferenceRange
) -> tuple[list[tuple[TestRecord, float]], list[tuple[TestRecord, float]]]:
    """Split numeric values by the reference envelope. A missing envelope
    rejects the entire group (the analyte has no usable reference)."""
    if isinstance(envelope, MissingRange):
        return [], list(values)
    kept = [(r, x) for r, x in values if in_envelope(x, envelope)]
    rejected = [(r, x) for r, x in values if not in_envelope(x, envelope)]
    return kept, rejected


def std_clip(values: list[float], k: float) -> list[float]:
    """Keep values within k sample standard deviations of the median."""
    if not values:
        raise EmptyInput("std_clip requires at least one value")
    if k <= 0:
        raise ValueError("k must be positive")
    if len(values) == 1:
        return list(values)
    med = statistics.median(values)
    std = statistics.stdev(values)
    if std == 0:
        return list(values)
    width = k * std
    return [x for x in values if abs(x - med) <= width]


@dataclass
class _Group:
    initial: int = 0
    non_numeric: int = 0
    null: int = 0
    lo: float | None = None
    hi: float | None = None
    has_bounds: bool = False
    values: list[float] = field(default_factory=list)  # only when std stage on
    in_range: int = 0
    # std stage parameters, fixed between passes
    center: float | None = None
    width: float | None = None


def _merge_bounds(g: _Group, ref: ReferenceRange) -> None:
    if isinstance(ref, Interval):
        lo, hi = ref.min, ref.max
    elif isinstance(ref, LowerOnly):
        lo, hi = ref.min, None
    elif isinstance(ref, UpperOnly):
        lo, hi = None, ref.max
    else:
        return
    if lo is not None:
        g.lo = lo if g.lo is None else min(g.lo, lo)
    if hi is not None:
        g.hi = hi if g.hi is None else max(g.hi, hi)
    g.has_bounds = True


def _envelope(g: _Group) -> ReferenceRange:
    if not g.has_bounds:
        return MISSING_RANGE
    if g.lo is not None and g.hi is not None:
        if g.lo > g.hi:
            return Interval(g.hi, g.lo)
        return Interval(g.lo, g.hi)
    if g.lo is not None:
        return LowerOnly(g.lo)
    return UpperOnly(g.hi)  # type: ignore[arg-type]


def run_pipeline(
    records: Iterable[TestRecord] | Callable[[], Iterable[TestRecord]],
    config: PipelineConfig | None = None,
    *,
    cleaned_sink: Callable[[TestRecord], None] | None = None,
    rejects_sink: Callable[[RejectedRecord], None] | None = None,
) -> PipelineResult:
    """Run the staged pipeline over an analyte-groupable record stream.

    ``records`` may be a plain iterable (materialized if not re-iterable) or
    a zero-argument callable returning a fresh iterator, which allows two
    streaming passes without holding the corpus in memory. When sinks are
    given, kept and rejected records are pushed there instead of being
    accumulated in the result.
    """
    config = config or PipelineConfig()
    factory: Callable[[], Iterable[TestRecord]]
    if callable(records):
        factory = records
    else:
        materialized = records if isinstance(records, (list, tuple)) else list(records)
        factory = lambda: materialized

    vocab = config.null_vocab
    misses = ParseMissCounter()
    ref_memo: dict[str | None, ReferenceRange] = {}
    groups: dict[str, _Group] = {}
    collect_values = config.std_multiplier is not None
    overrides = config.reference_overrides or {}

    # Pass 1: per-analyte reference envelopes (and values for the std stage).
    for rec in factory():
        g = groups.get(rec.analyte)
        if g is None:
            g = groups[rec.analyte] = _Group()
        g.initial += 1
        parsed = parse_result(rec.raw_result, vocab)
        if isinstance(parsed, Numeric):
            if collect_values:
                g.values.append(parsed.value)
        elif isinstance(parsed, Missing):
            g.null += 1
        else:
            g.non_numeric += 1
        if rec.analyte not in overrides:
            ref = ref_memo.get(rec.raw_reference)
            if ref is None:
                ref = parse_reference(rec.raw_reference, vocab, misses)
                ref_memo[rec.raw_reference] = ref
            _merge_bounds(g, ref)

    envelopes: dict[str, ReferenceRange] = {}
    for analyte, g in groups.items():
        envelopes[analyte] = overrides.get(analyte, _envelope(g))

    if collect_values:
        k = config.std_multiplier
        for analyte, g in groups.items():
            survivors = [x for x in g.values if in_envelope(x, envelopes[analyte])]
            if len(survivors) >= 2:
                g.center = statistics.median(survivors)
                std = statistics.stdev(survivors)
                g.width = k * std if std > 0 else None
            g.values = []

    cleaned: list[TestRecord] | None = [] if cleaned_sink is None else None
    rejects: list[RejectedRecord] | None = [] if rejects_sink is None else None

    def emit_reject(rec: TestRecord, reason: RejectReason) -> None:
        rr = RejectedRecord(rec.patient_id, rec.analyte, rec.raw_result,
                            _REASON_STAGE[reason], reason)
        if rejects_sink is not None:
            rejects_sink(rr)
        else:
            rejects.append(rr)  # type: ignore[union-attr]

    # Pass 2: classify every record with exactly one outcome.
    for rec in factory():
        g = groups[rec.analyte]
        parsed = parse_result(rec.raw_result, vocab)
        if isinstance(parsed, (Qualitative, Censored)):
            emit_reject(rec, RejectReason.NON_NUMERIC)
            continue
        if isinstance(parsed, Missing):
            emit_reject(rec, RejectReason.NULL_VALUE)
            continue
        x = parsed.value
        env = envelopes[rec.analyte]
        if isinstance(env, MissingRange):
            emit_reject(rec, RejectReason.NO_REFERENCE)
            continue
        if not in_envelope(x, env):
            emit_reject(rec, RejectReason.OUT_OF_RANGE)
            continue
        g.in_range += 1
        if g.width is not None and abs(x - g.center) > g.width:
            emit_reject(rec, RejectReason.STD_OUTLIER)
            continue
        if cleaned_sink is not None:
            cleaned_sink(rec)
        else:
            cleaned.append(rec)  # type: ignore[union-attr]

    reduction = []
    no_reference = []
    for analyte in sorted(groups):
        g = groups[analyte]
        numeric_only = g.initial - g.non_numeric
        not_null = numeric_only - g.null
        reduction.append(
            ReductionRow.from_counts(analyte, g.initial, numeric_only, not_null,
                                     g.in_range)
        )
        if isinstance(envelopes[analyte], MissingRange):
            no_reference.append(analyte)
    return PipelineResult(reduction, cleaned, rejects, no_reference, misses.count)


def positive_window_filter(
    tests: Iterable[TestRecord], events: Iterable[CovidEvent]
) -> Iterator[TestRecord]:
    """Keep tests collected inside each patient's positive window: from the
    first detected result to the first not-detected result after it, both
    inclusive; open-ended when no later not-detected exists."""
    windows: dict[str, tuple[date, date | None]] = {}
    by_patient: dict[str, list[CovidEvent]] = {}
    for ev in events:
        by_patient.setdefault(ev.patient_id, []).append(ev)
    for pid, evs in by_patient.items():
        evs.sort(key=lambda e: e.date)
        start = next((e.date for e in evs if e.status is CovidStatus.DETECTED), None)
        if start is None:
            continue
        end = next(
            (e.date for e in evs
             if e.status is CovidStatus.NOT_DETECTED and e.date > start),
            None,
        )
        windows[pid] = (start, end)
    for rec in tests:
        window = windows.get(rec.patient_id)
        if window is None:
            continue
        start, end = window
        if rec.collected_on >= start and (end is None or rec.collected_on <= end):
            yield rec
