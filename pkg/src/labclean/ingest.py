"""Streaming CSV ingestion with explicit encoding handling and quarantine.

Files are decoded as UTF-8 with an optional per-file Latin-1 fallback
(default policy). Rows that fail validation are quarantined losslessly to a
sidecar CSV with machine-readable reasons; report totals always reconcile.
"""

from __future__ import annotations

import codecs
import csv
import io
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from .schema import (
    OutcomeRecord,
    PatientRecord,
    Sentinel,
    Sex,
    TestRecord,
    parse_record_date,
)

logger = logging.getLogger(__name__)


class IngestError(Exception):
    pass


class UndecodableInput(IngestError):
    pass


class DuplicateHeader(IngestError):
    pass


class MissingRequiredColumn(IngestError):
    def __init__(self, kind: str, missing: list[str]):
        self.kind = kind
        self.missing = missing
        super().__init__(f"{kind} file lacks required columns: {', '.join(missing)}")


# Double-encoding signatures: UTF-8 bytes of common Portuguese accented
# characters re-decoded as Latin-1.
MOJIBAKE_SIGNATURES = (
    "Ã©", "Ã§", "Ã£", "Ã³", "Ã¡", "Ãª", "Ã­", "Ãº", "Ã´", "Ã¢", "Ãµ", "Ã€", "Ã‰",
)
_MOJIBAKE_RE = re.compile("|".join(re.escape(s) for s in MOJIBAKE_SIGNATURES))


def has_mojibake(text: str) -> bool:
    return _MOJIBAKE_RE.search(text) is not None


def fix_mojibake(text: str) -> str:
    """Reverse one round of UTF-8-as-Latin-1 double encoding where possible."""
    try:
        return text.encode("latin-1").decode("utf-8")
    except (UnicodeEncodeError, UnicodeDecodeError):
        return text


def decode_bytes(raw: bytes, policy: str = "utf8-then-latin1") -> tuple[str, str, int]:
    """Decode a complete file or line-aligned chunk.

    Returns (text, encoding_used, mojibake_suspects) where suspects counts
    lines carrying a double-encoding signature.
    """
    if policy not in ("strict-utf8", "utf8-then-latin1"):
        raise ValueError(f"unknown encoding policy: {policy}")
    try:
        text = raw.decode("utf-8")
        encoding = "utf8"
    except UnicodeDecodeError as exc:
        if policy == "strict-utf8":
            raise UndecodableInput(f"invalid UTF-8 at byte {exc.start}") from exc
        text = raw.decode("latin-1")
        encoding = "latin1"
    suspects = sum(1 for line in text.splitlines() if has_mojibake(line))
    return text, encoding, suspects


def detect_file_encoding(path: Path, policy: str = "utf8-then-latin1") -> str:
    """Decide the per-file encoding by an incremental UTF-8 scan."""
    decoder = codecs.getincrementaldecoder("utf-8")()
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 20):
            try:
                decoder.decode(chunk)
            except UnicodeDecodeError as exc:
                if policy == "strict-utf8":
                    raise UndecodableInput(f"invalid UTF-8 in {path}") from exc
                return "latin1"
        try:
            decoder.decode(b"", final=True)
        except UnicodeDecodeError as exc:
            if policy == "strict-utf8":
                raise UndecodableInput(f"invalid UTF-8 in {path}") from exc
            return "latin1"
    return "utf8"


HEADER_ALIASES = {
    "id_paciente": "patient_id",
    "dt_coleta": "collected_on",
    "de_origem": "origin",
    "de_exame": "exam",
    "de_analito": "analyte",
    "de_resultado": "raw_result",
    "cd_unidade": "unit",
    "de_valor_referencia": "raw_reference",
    "ic_sexo": "sex",
    "aa_nascimento": "birth_year",
    "cd_pais": "country",
    "cd_uf": "state",
    "cd_municipio": "municipality",
    "cd_cep": "postal_prefix",
    "dt_desfecho": "occurred_on",
    "de_desfecho": "description",
}

REQUIRED_COLUMNS = {
    "tests": ["patient_id", "collected_on", "exam", "analyte", "raw_result"],
    "patient": ["patient_id", "sex", "birth_year"],
    "outcome": ["patient_id", "occurred_on"],
}


def normalize_headers(raw_headers: list[str], kind: str | None = None) -> list[str]:
    """Trim, lowercase, and map known aliases to canonical names."""
    canonical = []
    for h in raw_headers:
        name = h.strip().casefold()
        canonical.append(HEADER_ALIASES.get(name, name))
    seen: set[str] = set()
    for name in canonical:
        if name in seen:
            raise DuplicateHeader(f"duplicate column after normalization: {name}")
        seen.add(name)
    if kind is not None:
        missing = [c for c in REQUIRED_COLUMNS[kind] if c not in seen]
        if missing:
            raise MissingRequiredColumn(kind, missing)
    return canonical


@dataclass
class IngestConfig:
    delimiter: str = "|"
    encoding_policy: str = "utf8-then-latin1"
    fix_mojibake: bool = False
    quarantine: bool = True
    quarantine_path: Path | None = None  # default: <input>.quarantine.csv


@dataclass
class IngestReport:
    rows_read: int = 0
    rows_ok: int = 0
    rows_quarantined: int = 0
    encoding_used: str = "utf8"
    mojibake_suspects: int = 0
    issues: list[tuple[int, str, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_ok": self.rows_ok,
            "rows_quarantined": self.rows_quarantined,
            "encoding_used": self.encoding_used,
            "mojibake_suspects": self.mojibake_suspects,
            "issues": [list(i) for i in self.issues],
        }


_MAX_ISSUES = 1000  # keep reports bounded on very dirty files


def _open_text(path: Path, encoding: str) -> io.TextIOWrapper:
    return open(path, "r", encoding="latin-1" if encoding == "latin1" else "utf-8",
                newline="")


def _load_rows(
    path: Path,
    config: IngestConfig,
    kind: str,
    build: Callable[[dict[str, str]], object],
) -> tuple[Iterator[object], IngestReport]:
    """Shared loader: header normalization, row dict assembly, quarantine."""
    path = Path(path)
    report = IngestReport()
    report.encoding_used = detect_file_encoding(path, config.encoding_policy)

    fh = _open_text(path, report.encoding_used)
    reader = csv.reader(fh, delimiter=config.delimiter)
    try:
        raw_headers = next(reader)
    except StopIteration:
        fh.close()
        raise IngestError(f"empty file: {path}")
    headers = normalize_headers(raw_headers, kind)
    n_cols = len(headers)

    qpath = config.quarantine_path or path.with_suffix(path.suffix + ".quarantine.csv")

    def gen() -> Iterator[object]:
        qfh = qwriter = None
        if config.quarantine:
            qfh = open(qpath, "w", encoding="utf-8", newline="")
            qwriter = csv.writer(qfh)
            qwriter.writerow(["line_no", "reason", "raw_line"])

        def quarantine(line_no: int, fld: str, reason: str, row: list[str]) -> None:
            report.rows_quarantined += 1
            if len(report.issues) < _MAX_ISSUES:
                report.issues.append((line_no, fld, reason))
            if qwriter is not None:
                qwriter.writerow([line_no, reason, config.delimiter.join(row)])

        try:
            for row in reader:
                report.rows_read += 1
                line_no = reader.line_num
                if len(row) != n_cols:
                    quarantine(line_no, "*", "WrongColumnCount", row)
                    continue
                if config.fix_mojibake:
                    row = [fix_mojibake(c) if has_mojibake(c) else c for c in row]
                values = dict(zip(headers, row))
                try:
                    record = build(values)
                except _RowError as exc:
                    quarantine(line_no, exc.field_name, exc.reason, row)
                    continue
                report.rows_ok += 1
                if any(has_mojibake(c) for c in row):
                    report.mojibake_suspects += 1
                yield record
        finally:
            if qfh is not None:
                qfh.close()
            fh.close()

    return gen(), report


class _RowError(Exception):
    def __init__(self, field_name: str, reason: str):
        self.field_name = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


def _build_test(v: dict[str, str]) -> TestRecord:
    pid = v.get("patient_id", "").strip()
    if not pid:
        raise _RowError("patient_id", "EmptyPatientId")
    try:
        collected = parse_record_date(v["collected_on"])
    except ValueError:
        raise _RowError("collected_on", "BadDate")
    unit = v.get("unit")
    ref = v.get("raw_reference")
    return TestRecord(
        patient_id=pid,
        collected_on=collected,
        origin=v.get("origin", "").strip(),
        exam=v.get("exam", "").strip(),
        analyte=v.get("analyte", "").strip(),
        raw_result=v.get("raw_result", ""),
        unit=unit.strip() if unit is not None else None,
        raw_reference=ref,
    )


def _build_patient(v: dict[str, str]) -> PatientRecord:
    pid = v.get("patient_id", "").strip()
    if not pid:
        raise _RowError("patient_id", "EmptyPatientId")
    sex_raw = v.get("sex", "").strip().upper()
    if sex_raw not in ("F", "M"):
        raise _RowError("sex", "BadSex")
    by_raw = v.get("birth_year", "").strip()
    birth_year: int | Sentinel
    if by_raw.upper() == Sentinel.AAAA.value:
        birth_year = Sentinel.AAAA
    else:
        try:
            birth_year = int(by_raw)
        except ValueError:
            raise _RowError("birth_year", "BadBirthYear")
        if birth_year < 1931:
            raise _RowError("birth_year", "BadBirthYear")
    muni_raw = v.get("municipality", "").strip()
    postal_raw = v.get("postal_prefix", "").strip()
    muni = Sentinel.MMMM if muni_raw.upper() == Sentinel.MMMM.value else muni_raw
    postal: str | Sentinel
    postal = Sentinel.CCCC if postal_raw.upper() == Sentinel.CCCC.value else postal_raw
    if not isinstance(postal, Sentinel) and postal and not (
        len(postal) == 5 and postal.isdigit()
    ):
        raise _RowError("postal_prefix", "BadPostalPrefix")
    return PatientRecord(
        patient_id=pid,
        sex=Sex(sex_raw),
        birth_year=birth_year,
        country=v.get("country", "").strip(),
        state=v.get("state", "").strip(),
        municipality=muni,
        postal_prefix=postal,
    )


def _build_outcome(v: dict[str, str]) -> OutcomeRecord:
    pid = v.get("patient_id", "").strip()
    if not pid:
        raise _RowError("patient_id", "EmptyPatientId")
    try:
        occurred = parse_record_date(v["occurred_on"])
    except ValueError:
        raise _RowError("occurred_on", "BadDate")
    known = {"patient_id", "occurred_on", "description"}
    extra = {k: val for k, val in v.items() if k not in known}
    return OutcomeRecord(pid, occurred, v.get("description", "").strip(), extra)


def load_tests(path: Path, config: IngestConfig | None = None):
    """Stream validated TestRecords; report totals are final once the stream
    is exhausted."""
    return _load_rows(path, config or IngestConfig(), "tests", _build_test)


def load_patients(path: Path, config: IngestConfig | None = None):
    return _load_rows(path, config or IngestConfig(), "patient", _build_patient)


def load_outcomes(path: Path, config: IngestConfig | None = None):
    return _load_rows(path, config or IngestConfig(), "outcome", _build_outcome)
