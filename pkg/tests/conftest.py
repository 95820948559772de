from datetime import date

import pytest

from labclean.schema import TestRecord


def make_test(analyte="Glicose", result="80", reference="75 a 99",
              patient="P1", collected=date(2020, 4, 1), exam="GLICOSE"):
    return TestRecord(
        patient_id=patient,
        collected_on=collected,
        origin="HOSP",
        exam=exam,
        analyte=analyte,
        raw_result=result,
        unit="mg/dL",
        raw_reference=reference,
    )


@pytest.fixture
def tests_csv(tmp_path):
    """Small well-formed pipe-delimited tests file."""
    path = tmp_path / "tests.csv"
    path.write_text(
        "ID_PACIENTE|DT_COLETA|DE_ORIGEM|DE_EXAME|DE_ANALITO|DE_RESULTADO|"
        "CD_UNIDADE|DE_VALOR_REFERENCIA\n"
        "P1|2020-01-05|HOSP|GLICOSE|Glicose|80|mg/dL|75 a 99\n"
        "P2|2020/02/10|HOSP|GLICOSE|Glicose|101|mg/dL|75 a 99\n"
        "P3|2020-03-15|HOSP|HEMOGRAMA|Hemoglobina|13.5|g/dL|12 a 16\n",
        encoding="utf-8",
    )
    return path
