from datetime import date

import pytest

from labclean.schema import (
    Censored,
    CovidEvent,
    CovidStatus,
    FieldError,
    Interval,
    Numeric,
    PatientRecord,
    QualitativeRange,
    ReductionRow,
    Sentinel,
    Sex,
    TestRecord,
    parse_record_date,
    reduction_pct,
)


def test_parse_record_date_both_formats():
    assert parse_record_date("2020/03/15") == date(2020, 3, 15)
    assert parse_record_date("2020-03-15") == date(2020, 3, 15)


@pytest.mark.parametrize("raw", ["2020-13-40", "15/03/2020", "garbage", "2020.03.15"])
def test_parse_record_date_rejects(raw):
    with pytest.raises(ValueError):
        parse_record_date(raw)


def test_patient_birth_year_sentinel():
    p = PatientRecord("P1", Sex.F, Sentinel.AAAA)
    assert p.birth_year is Sentinel.AAAA


def test_patient_birth_year_before_1931_rejected():
    with pytest.raises(FieldError) as exc:
        PatientRecord("P1", Sex.F, 1930)
    assert exc.value.field_name == "birth_year"


def test_patient_bad_postal_prefix():
    with pytest.raises(FieldError) as exc:
        PatientRecord("P1", Sex.M, 1959, postal_prefix="12a45")
    assert exc.value.field_name == "postal_prefix"
    PatientRecord("P1", Sex.M, 1959, postal_prefix="01234")
    PatientRecord("P1", Sex.M, 1959, postal_prefix=Sentinel.CCCC)


def test_patient_bad_sex():
    with pytest.raises(FieldError) as exc:
        PatientRecord("P1", "X", 1959)  # type: ignore[arg-type]
    assert exc.value.field_name == "sex"


def test_test_record_requires_patient_id():
    with pytest.raises(FieldError):
        TestRecord("", date(2020, 1, 1), "HOSP", "E", "A", "1")


def test_numeric_must_be_finite():
    with pytest.raises(FieldError):
        Numeric(float("inf"))
    with pytest.raises(FieldError):
        Numeric(float("nan"))


def test_censored_direction_closed():
    with pytest.raises(FieldError):
        Censored("sideways", 1.0)


def test_interval_ordering():
    with pytest.raises(FieldError):
        Interval(99.0, 75.0)


def test_qualitative_range_nonempty():
    with pytest.raises(FieldError):
        QualitativeRange(frozenset())


def test_reduction_pct_published_values():
    assert reduction_pct(108152, 86814) == 19.73
    assert reduction_pct(2733, 675) == 75.30
    assert reduction_pct(5, 5) == 0.0
    assert reduction_pct(0, 0) == 0.0


def test_reduction_pct_final_exceeds_initial():
    with pytest.raises(FieldError):
        reduction_pct(5, 6)


def test_reduction_row_monotonicity_enforced():
    with pytest.raises(FieldError):
        ReductionRow("x", 10, 11, 9, 8, 20.0)
    row = ReductionRow.from_counts("x", 10, 9, 8, 7)
    assert row.reduction_pct == 30.0


def test_covid_event_status_enum_only():
    with pytest.raises(FieldError):
        CovidEvent("P1", date(2020, 4, 1), "detected")  # type: ignore[arg-type]
    CovidEvent("P1", date(2020, 4, 1), CovidStatus.DETECTED)
