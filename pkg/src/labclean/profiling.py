"""Descriptive statistics and distribution computations.

Everything here is a fold with an order-independent merge: shuffling the
input stream never changes any output.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .schema import (
    CovidEvent,
    CovidStatus,
    PatientRecord,
    Qualitative,
    Sentinel,
    Sex,
    TestRecord,
)
from .valueparse import DEFAULT_NULL_VOCAB, NullVocabulary, parse_result

logger = logging.getLogger(__name__)


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class ColumnSummary:
    name: str
    count: int
    distinct: int
    mode: str | None
    mode_freq: int


@dataclass(frozen=True)
class BoxplotStats:
    analyte: str
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...]
    n: int


def describe(
    rows: Iterable[Mapping[str, str]], vocab: NullVocabulary = DEFAULT_NULL_VOCAB
) -> list[ColumnSummary]:
    """One summary per column; null-vocabulary values are excluded from the
    counts and a mode tie breaks to the lexicographically smallest value."""
    counters: dict[str, Counter] = {}
    order: list[str] = []
    for row in rows:
        for col, value in row.items():
            if col not in counters:
                counters[col] = Counter()
                order.append(col)
            if value is not None and value not in vocab:
                counters[col][value] += 1
    summaries = []
    for col in order:
        c = counters[col]
        total = sum(c.values())
        if c:
            mode, freq = min(c.items(), key=lambda kv: (-kv[1], kv[0]))
        else:
            mode, freq = None, 0
        summaries.append(ColumnSummary(col, total, len(c), mode, freq))
    return summaries


def _pct(part: int, total: int) -> float:
    if total == 0:
        return 0.0
    p = Decimal(100) * Decimal(part) / Decimal(total)
    return float(p.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def sex_distribution(patients: Iterable[PatientRecord]) -> dict[str, dict[str, float]]:
    counts = Counter(p.sex for p in patients)
    total = counts[Sex.F] + counts[Sex.M]
    return {
        sex.value: {"count": counts[sex], "pct": _pct(counts[sex], total)}
        for sex in (Sex.F, Sex.M)
    }


@dataclass(frozen=True)
class AgeDistribution:
    histogram: dict[int, int]  # age -> count, 1-year buckets
    senior_bucket: int  # AAAA sentinel: born 1930 or earlier
    reference_year: int


def age_distribution(
    patients: Iterable[PatientRecord], reference_year: int = 2020
) -> AgeDistribution:
    if reference_year < 1931:
        raise ValueError("reference_year must be at least 1931")
    hist: Counter = Counter()
    seniors = 0
    for p in patients:
        if isinstance(p.birth_year, Sentinel):
            seniors += 1
        else:
            hist[reference_year - p.birth_year] += 1
    return AgeDistribution(dict(sorted(hist.items())), seniors, reference_year)


def _month_key(d: date) -> str:
    return f"{d.year:04d}-{d.month:02d}"


def _month_range(lo: str, hi: str) -> Iterator[str]:
    y, m = int(lo[:4]), int(lo[5:7])
    while True:
        key = f"{y:04d}-{m:02d}"
        yield key
        if key == hi:
            return
        m += 1
        if m > 12:
            y, m = y + 1, 1


def exams_per_period(
    tests: Iterable[TestRecord], granularity: str = "month"
) -> dict[str, int]:
    """Counts per calendar bucket, contiguous and zero-filled between the
    first and last observed dates."""
    if granularity not in ("day", "month"):
        raise ValueError(f"granularity must be day or month: {granularity}")
    counts: Counter = Counter()
    lo: date | None = None
    hi: date | None = None
    for rec in tests:
        d = rec.collected_on
        lo = d if lo is None or d < lo else lo
        hi = d if hi is None or d > hi else hi
        counts[d.isoformat() if granularity == "day" else _month_key(d)] += 1
    if lo is None:
        return {}
    if granularity == "day":
        buckets = {}
        d = lo
        while d <= hi:
            key = d.isoformat()
            buckets[key] = counts[key]
            d += timedelta(days=1)
        return buckets
    return {k: counts[k] for k in _month_range(_month_key(lo), _month_key(hi))}


def top_k_by_month(
    tests: Iterable[TestRecord], field: str = "exam", k: int = 20
) -> dict[str, list[tuple[str, int]]]:
    """Per month, the k most frequent exam or analyte names, descending by
    count with lexicographic tie-break."""
    if field not in ("exam", "analyte"):
        raise ValueError(f"field must be exam or analyte: {field}")
    per_month: dict[str, Counter] = {}
    for rec in tests:
        per_month.setdefault(_month_key(rec.collected_on), Counter())[
            getattr(rec, field)
        ] += 1
    return {
        month: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        for month, c in sorted(per_month.items())
    }


class CovidVocabulary:
    """Maps (analyte, qualitative result label) pairs to covid statuses.

    Analyte "*" matches any analyte. Lookups are case-insensitive.
    """

    def __init__(self, entries: Iterable[tuple[str, str, CovidStatus]]):
        self._map: dict[tuple[str, str], CovidStatus] = {}
        for analyte, label, status in entries:
            self._map[(analyte.casefold(), label.casefold())] = status

    def lookup(self, analyte: str, label: str) -> CovidStatus | None:
        key = label.casefold()
        return self._map.get((analyte.casefold(), key)) or self._map.get(("*", key))

    @classmethod
    def default(cls) -> "CovidVocabulary":
        # Einstein is the only source with standardized covid result labels.
        return cls(
            [
                ("*", "detectado", CovidStatus.DETECTED),
                ("*", "não detectado", CovidStatus.NOT_DETECTED),
                ("*", "nao detectado", CovidStatus.NOT_DETECTED),
                ("*", "inconclusivo", CovidStatus.INCONCLUSIVE),
            ]
        )

    @classmethod
    def from_file(cls, path: Path) -> "CovidVocabulary":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            (e["analyte"], e["result"], CovidStatus(e["status"])) for e in data
        )


def covid_events(
    tests: Iterable[TestRecord],
    vocab: CovidVocabulary,
    parse_vocab: NullVocabulary = DEFAULT_NULL_VOCAB,
) -> Iterator[CovidEvent]:
    """Derive covid events from tests whose qualitative result is in the
    vocabulary; everything else is ignored."""
    unmapped: set[str] = set()
    for rec in tests:
        parsed = parse_result(rec.raw_result, parse_vocab)
        if not isinstance(parsed, Qualitative):
            continue
        status = vocab.lookup(rec.analyte, parsed.label)
        if status is None:
            if parsed.label not in unmapped:
                unmapped.add(parsed.label)
                logger.info("unmapped qualitative result label: %r", parsed.label)
            continue
        yield CovidEvent(rec.patient_id, rec.collected_on, status)


def covid_by_month(
    tests: Iterable[TestRecord], vocab: CovidVocabulary
) -> dict[str, dict[str, int]]:
    per_month: dict[str, Counter] = {}
    for ev in covid_events(tests, vocab):
        per_month.setdefault(_month_key(ev.date), Counter())[ev.status.value] += 1
    return {
        month: {s.value: c[s.value] for s in CovidStatus}
        for month, c in sorted(per_month.items())
    }


def _median(sorted_values: list[float]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return sorted_values[mid]
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def boxplot_stats(values: list[float], analyte: str = "", whis: float = 1.5) -> BoxplotStats:
    """Five-number boxplot summary with median-of-halves quartiles and
    whiskers at the most extreme points within ``whis``·IQR of the box."""
    if not values:
        raise EmptyInput("boxplot_stats requires at least one value")
    xs = sorted(values)
    n = len(xs)
    med = _median(xs)
    half = n // 2
    if half == 0:
        q1 = q3 = med
    else:
        q1 = _median(xs[:half])
        q3 = _median(xs[-half:])
    iqr = q3 - q1
    lo_fence = q1 - whis * iqr
    hi_fence = q3 + whis * iqr
    inside = [x for x in xs if lo_fence <= x <= hi_fence]
    whisker_low = inside[0]
    whisker_high = inside[-1]
    outliers = tuple(x for x in xs if x < whisker_low or x > whisker_high)
    return BoxplotStats(analyte, q1, med, q3, whisker_low, whisker_high, outliers, n)
