"""Classification of raw result strings and reference-range expressions.

Both parsers are total: any input string maps to some variant, never an
exception. Unrecognized reference expressions degrade to the missing range
and bump an optional parse-miss counter so the degradation stays observable.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .schema import (
    MISSING,
    MISSING_RANGE,
    Censored,
    Interval,
    LowerOnly,
    Numeric,
    ParsedResult,
    Qualitative,
    QualitativeRange,
    ReferenceRange,
    UpperOnly,
)

logger = logging.getLogger(__name__)

_REQUIRED_NULL_TOKENS = frozenset({"", "nan", "null"})


@dataclass(frozen=True)
class NullVocabulary:
    """Case-insensitive tokens treated as missing values."""

    tokens: frozenset[str] = _REQUIRED_NULL_TOKENS

    def __post_init__(self) -> None:
        normalized = frozenset(t.casefold() for t in self.tokens) | _REQUIRED_NULL_TOKENS
        object.__setattr__(self, "tokens", normalized)

    def __contains__(self, raw: str) -> bool:
        return raw.strip().casefold() in self.tokens


DEFAULT_NULL_VOCAB = NullVocabulary()


@dataclass
class ParseMissCounter:
    """Counts reference strings that fell through the whole grammar."""

    count: int = 0
    samples: list[str] = field(default_factory=list)

    def record(self, raw: str, keep_samples: int = 20) -> None:
        self.count += 1
        if len(self.samples) < keep_samples:
            self.samples.append(raw)


# Decimal literal with "." separator, or a single "," between digits
# (Brazilian locale); no thousands separators.
_NUM = r"[+-]?(?:\d+(?:[.,]\d+)?|\.\d+)"
_NUMERIC_RE = re.compile(rf"^{_NUM}$")
_CENSORED_BELOW_RE = re.compile(rf"^(?:<=|<|≤|inferior\s+a)\s*({_NUM})$", re.IGNORECASE)
_CENSORED_ABOVE_RE = re.compile(rf"^(?:>=|>|≥|superior\s+a)\s*({_NUM})$", re.IGNORECASE)

_INTERVAL_RE = re.compile(
    rf"^({_NUM})\s*(?:a|to|até|ate|-|–)\s*({_NUM})$", re.IGNORECASE
)
_UPPER_RE = re.compile(
    rf"^(?:até|ate|until|inferior\s+a|menor\s+que|<=|<|≤)\s*({_NUM})$", re.IGNORECASE
)
_LOWER_RE = re.compile(
    rf"^(?:superior\s+a|acima\s+de|maior\s+que|>=|>|≥)\s*({_NUM})$", re.IGNORECASE
)
_LABEL_SPLIT_RE = re.compile(r"/|\bou\b", re.IGNORECASE)


def _to_float(token: str) -> float:
    return float(token.replace(",", ".", 1))


def parse_result(raw: str, vocab: NullVocabulary = DEFAULT_NULL_VOCAB) -> ParsedResult:
    """Classify a raw result string. Total over strings."""
    t = raw.strip()
    if t.casefold() in vocab.tokens:
        return MISSING
    if _NUMERIC_RE.match(t):
        return Numeric(_to_float(t))
    m = _CENSORED_BELOW_RE.match(t)
    if m:
        return Censored("below", _to_float(m.group(1)))
    m = _CENSORED_ABOVE_RE.match(t)
    if m:
        return Censored("above", _to_float(m.group(1)))
    return Qualitative(t.casefold())


def parse_reference(
    raw: str | None,
    vocab: NullVocabulary = DEFAULT_NULL_VOCAB,
    misses: ParseMissCounter | None = None,
) -> ReferenceRange:
    """Parse a reference-range expression. Total over strings and None."""
    if raw is None:
        return MISSING_RANGE
    t = raw.strip()
    if t.casefold() in vocab.tokens:
        return MISSING_RANGE

    m = _INTERVAL_RE.match(t)
    if m:
        lo, hi = _to_float(m.group(1)), _to_float(m.group(2))
        if lo > hi:
            logger.warning("reference interval with swapped bounds: %r", raw)
            lo, hi = hi, lo
        return Interval(lo, hi)
    m = _UPPER_RE.match(t)
    if m:
        return UpperOnly(_to_float(m.group(1)))
    m = _LOWER_RE.match(t)
    if m:
        return LowerOnly(_to_float(m.group(1)))

    parts = [p.strip() for p in _LABEL_SPLIT_RE.split(t)]
    if len(parts) > 1 and all(p and not _NUMERIC_RE.match(p) for p in parts):
        return QualitativeRange(frozenset(p.casefold() for p in parts))

    if misses is not None:
        misses.record(raw)
    return MISSING_RANGE


def _bounds(r: ReferenceRange) -> tuple[float | None, float | None]:
    if isinstance(r, Interval):
        return r.min, r.max
    if isinstance(r, LowerOnly):
        return r.min, None
    if isinstance(r, UpperOnly):
        return None, r.max
    return None, None


def merge_references(ranges: list[ReferenceRange]) -> ReferenceRange:
    """Envelope across all numeric-bearing ranges: lowest lower bound and
    highest upper bound. Qualitative ranges contribute no bounds."""
    if not ranges:
        raise ValueError("merge_references requires a non-empty list")
    lowers = [b for r in ranges for b in (_bounds(r)[0],) if b is not None]
    uppers = [b for r in ranges for b in (_bounds(r)[1],) if b is not None]
    if lowers and uppers:
        lo, hi = min(lowers), max(uppers)
        if lo > hi:
            logger.warning("envelope with crossed bounds (%s > %s); swapping", lo, hi)
            lo, hi = hi, lo
        return Interval(lo, hi)
    if lowers:
        return LowerOnly(min(lowers))
    if uppers:
        return UpperOnly(max(uppers))
    return MISSING_RANGE
