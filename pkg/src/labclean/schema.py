"""Domain types for clinical lab datasets and derived analytical values.

All types are immutable after construction and validate their invariants
eagerly; a failed construction raises :class:`FieldError` naming the field
and the offending value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from math import isfinite
from typing import Mapping


class FieldError(ValueError):
    """A record field violated an invariant."""

    def __init__(self, field_name: str, value: object, reason: str):
        self.field_name = field_name
        self.value = value
        self.reason = reason
        super().__init__(f"{field_name}={value!r}: {reason}")


class Sex(str, Enum):
    F = "F"
    M = "M"


class Sentinel(str, Enum):
    """Privacy placeholders used by the source files for rare values."""

    AAAA = "AAAA"  # birth year at or before 1930
    MMMM = "MMMM"  # low-occurrence municipality
    CCCC = "CCCC"  # low-occurrence postal prefix


MIN_BIRTH_YEAR = 1931


def parse_record_date(raw: str) -> date:
    """Parse yyyy/MM/dd or yyyy-MM-dd. Raises ValueError on anything else."""
    s = raw.strip()
    if len(s) == 10 and s[4] in "/-" and s[7] == s[4]:
        return date(int(s[0:4]), int(s[5:7]), int(s[8:10]))
    raise ValueError(f"not a yyyy/MM/dd or yyyy-MM-dd date: {raw!r}")


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    sex: Sex
    birth_year: int | Sentinel
    country: str = "BR"
    state: str = ""
    municipality: str | Sentinel = ""
    postal_prefix: str | Sentinel = ""

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise FieldError("patient_id", self.patient_id, "must be non-empty")
        if not isinstance(self.sex, Sex):
            raise FieldError("sex", self.sex, "must be F or M")
        by = self.birth_year
        if isinstance(by, Sentinel):
            if by is not Sentinel.AAAA:
                raise FieldError("birth_year", by, "only the AAAA sentinel is valid here")
        elif isinstance(by, int):
            if by < MIN_BIRTH_YEAR:
                raise FieldError(
                    "birth_year", by, f"years before {MIN_BIRTH_YEAR} must arrive as AAAA"
                )
        else:
            raise FieldError("birth_year", by, "must be an integer year or AAAA")
        pp = self.postal_prefix
        if pp and not isinstance(pp, Sentinel):
            if not (len(pp) == 5 and pp.isdigit()):
                raise FieldError("postal_prefix", pp, "must be 5 decimal digits or CCCC")


@dataclass(frozen=True)
class TestRecord:
    patient_id: str
    collected_on: date
    origin: str
    exam: str
    analyte: str
    raw_result: str
    unit: str | None = None
    raw_reference: str | None = None

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise FieldError("patient_id", self.patient_id, "must be non-empty")
        if not isinstance(self.collected_on, date):
            raise FieldError("collected_on", self.collected_on, "must be a calendar date")


@dataclass(frozen=True)
class OutcomeRecord:
    """Outcome row. The published dictionary covers only size and dates, so the
    shape here is minimal; unrecognized columns are preserved in ``extra``."""

    patient_id: str
    occurred_on: date
    description: str = ""
    extra: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise FieldError("patient_id", self.patient_id, "must be non-empty")
        if not isinstance(self.occurred_on, date):
            raise FieldError("occurred_on", self.occurred_on, "must be a calendar date")


# --- parsed result variants ---------------------------------------------


@dataclass(frozen=True)
class Numeric:
    value: float

    def __post_init__(self) -> None:
        if not isfinite(self.value):
            raise FieldError("value", self.value, "numeric results must be finite")


@dataclass(frozen=True)
class Qualitative:
    label: str


@dataclass(frozen=True)
class Censored:
    direction: str  # "below" | "above"
    bound: float

    def __post_init__(self) -> None:
        if self.direction not in ("below", "above"):
            raise FieldError("direction", self.direction, "must be 'below' or 'above'")
        if not isfinite(self.bound):
            raise FieldError("bound", self.bound, "censoring bound must be finite")


@dataclass(frozen=True)
class Missing:
    pass


MISSING = Missing()

ParsedResult = Numeric | Qualitative | Censored | Missing


# --- reference range variants --------------------------------------------


@dataclass(frozen=True)
class Interval:
    min: float
    max: float

    def __post_init__(self) -> None:
        if self.min > self.max:
            raise FieldError("min", self.min, f"interval min exceeds max {self.max}")


@dataclass(frozen=True)
class LowerOnly:
    min: float


@dataclass(frozen=True)
class UpperOnly:
    max: float


@dataclass(frozen=True)
class QualitativeRange:
    labels: frozenset[str]

    def __post_init__(self) -> None:
        if not self.labels:
            raise FieldError("labels", self.labels, "qualitative range needs labels")


@dataclass(frozen=True)
class MissingRange:
    pass


MISSING_RANGE = MissingRange()

ReferenceRange = Interval | LowerOnly | UpperOnly | QualitativeRange | MissingRange


# --- accounting -----------------------------------------------------------


def reduction_pct(initial: int, final: int) -> float:
    """Percentage of records discarded, rounded half-up to 2 decimals.

    Defined as 0.00 for an empty group.
    """
    if final > initial:
        raise FieldError("final", final, f"exceeds initial {initial}")
    if initial == 0:
        return 0.0
    pct = Decimal(100) * (Decimal(initial) - Decimal(final)) / Decimal(initial)
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class ReductionRow:
    analyte: str
    initial: int
    numeric_only: int
    not_null: int
    in_range: int
    reduction_pct: float

    def __post_init__(self) -> None:
        counts = (self.initial, self.numeric_only, self.not_null, self.in_range)
        if any(c < 0 for c in counts):
            raise FieldError("counts", counts, "stage counts must be non-negative")
        if not (self.initial >= self.numeric_only >= self.not_null >= self.in_range):
            raise FieldError("counts", counts, "stage counts must be monotone non-increasing")
        expected = reduction_pct(self.initial, self.in_range)
        if abs(self.reduction_pct - expected) > 0.005:
            raise FieldError("reduction_pct", self.reduction_pct, f"expected {expected}")

    @classmethod
    def from_counts(
        cls, analyte: str, initial: int, numeric_only: int, not_null: int, in_range: int
    ) -> "ReductionRow":
        return cls(analyte, initial, numeric_only, not_null, in_range,
                   reduction_pct(initial, in_range))


class CovidStatus(str, Enum):
    DETECTED = "detected"
    NOT_DETECTED = "not_detected"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CovidEvent:
    patient_id: str
    date: date
    status: CovidStatus

    def __post_init__(self) -> None:
        if not self.patient_id:
            raise FieldError("patient_id", self.patient_id, "must be non-empty")
        if not isinstance(self.status, CovidStatus):
            raise FieldError("status", self.status, "must come from the covid vocabulary")
