"""Deterministic synthetic corpus generator with a ground-truth manifest.

Dirt is injected by exact counts (floor of rate x rows), never by coin
flips, so the manifest's expected pipeline counts are exact oracles rather
than statistical targets. Identical seed and spec give byte-identical files.
"""

from __future__ import annotations

import json
import random

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

from .schema import parse_record_date


class InvalidSpec(ValueError):
    pass


_RATE_FIELDS = (
    "null_rate",
    "non_numeric_rate",
    "out_of_range_rate",
    "missing_reference_rate",
    "mojibake_rate",
    "malformed_rate",
)


@dataclass(frozen=True)
class DirtProfile:
    null_rate: float = 0.0
    non_numeric_rate: float = 0.0
    out_of_range_rate: float = 0.0
    missing_reference_rate: float = 0.0
    mojibake_rate: float = 0.0
    malformed_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in _RATE_FIELDS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidSpec(f"{name}={v} outside [0, 1]")
        row_rates = (self.null_rate + self.non_numeric_rate + self.out_of_range_rate
                     + self.malformed_rate)
        if row_rates > 1.0:
            raise InvalidSpec(f"row dirt rates sum to {row_rates} > 1")


@dataclass(frozen=True)
class AnalyteSpec:
    name: str
    exam: str
    unit: str
    range_low: float
    range_high: float
    weight: float = 1.0
    dirt: DirtProfile = DirtProfile()

    def __post_init__(self) -> None:
        if self.range_low > self.range_high:
            raise InvalidSpec(f"{self.name}: range_low > range_high")
        if self.weight <= 0:
            raise InvalidSpec(f"{self.name}: weight must be positive")


@dataclass(frozen=True)
class SynthSpec:
    seed: int
    n_patients: int
    n_tests: int
    date_start: date
    date_end: date
    analytes: tuple[AnalyteSpec, ...]
    delimiter: str = "|"
    encoding: str = "utf8"
    sex_f_rate: float = 0.5
    sentinel_year_rate: float = 0.02
    emit_row_labels: bool = False

    def __post_init__(self) -> None:
        if self.n_patients <= 0 or self.n_tests < 0:
            raise InvalidSpec("n_patients must be positive and n_tests non-negative")
        if self.date_start > self.date_end:
            raise InvalidSpec("date_start after date_end")
        if not self.analytes:
            raise InvalidSpec("at least one analyte is required")
        if self.encoding not in ("utf8", "latin1"):
            raise InvalidSpec(f"encoding must be utf8 or latin1: {self.encoding}")
        if not 0.0 <= self.sex_f_rate <= 1.0:
            raise InvalidSpec("sex_f_rate outside [0, 1]")
        if not 0.0 <= self.sentinel_year_rate <= 1.0:
            raise InvalidSpec("sentinel_year_rate outside [0, 1]")


DEFAULT_ANALYTES = (
    AnalyteSpec("Glicose", "GLICOSE", "mg/dL", 75.0, 99.0),
    AnalyteSpec("Hemoglobina", "HEMOGRAMA", "g/dL", 12.0, 16.0),
    AnalyteSpec("Leucócitos", "HEMOGRAMA", "x10^3/uL", 4.0, 11.0),
    AnalyteSpec("Magnésio", "MAGNESIO", "mg/dL", 1.6, 2.6),
    AnalyteSpec("Creatinina", "CREATININA", "mg/dL", 0.6, 1.3),
)


def load_spec(path: Path) -> SynthSpec:
    """Read a synth spec from a TOML file."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise InvalidSpec(f"bad TOML: {exc}") from exc
    return spec_from_dict(data)


def spec_from_dict(data: dict) -> SynthSpec:
    try:
        defaults = data.get("dirt", {})
        analytes = []
        for a in data.get("analyte", []):
            rates = {k: a.get(k, defaults.get(k, 0.0)) for k in _RATE_FIELDS}
            analytes.append(
                AnalyteSpec(
                    name=a["name"],
                    exam=a.get("exam", a["name"].upper()),
                    unit=a.get("unit", ""),
                    range_low=float(a["range_low"]),
                    range_high=float(a["range_high"]),
                    weight=float(a.get("weight", 1.0)),
                    dirt=DirtProfile(**rates),
                )
            )
        if not analytes:
            analytes = [
                AnalyteSpec(a.name, a.exam, a.unit, a.range_low, a.range_high,
                            a.weight, DirtProfile(**{k: defaults.get(k, 0.0)
                                                     for k in _RATE_FIELDS}))
                for a in DEFAULT_ANALYTES
            ]
        return SynthSpec(
            seed=int(data["seed"]),
            n_patients=int(data["n_patients"]),
            n_tests=int(data["n_tests"]),
            date_start=parse_record_date(str(data["date_start"])),
            date_end=parse_record_date(str(data["date_end"])),
            analytes=tuple(analytes),
            delimiter=data.get("delimiter", "|"),
            encoding=data.get("encoding", "utf8"),
            sex_f_rate=float(data.get("sex_f_rate", 0.5)),
            sentinel_year_rate=float(data.get("sentinel_year_rate", 0.02)),
            emit_row_labels=bool(data.get("emit_row_labels", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(f"invalid synth spec: {exc}") from exc


def _allocate(total: int, weights: list[float]) -> list[int]:
    """Largest-remainder split of total by weights; sums exactly to total."""
    wsum = sum(weights)
    raw = [total * w / wsum for w in weights]
    counts = [int(x) for x in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


TESTS_HEADER = ["ID_PACIENTE", "DT_COLETA", "DE_ORIGEM", "DE_EXAME", "DE_ANALITO",
                "DE_RESULTADO", "CD_UNIDADE", "DE_VALOR_REFERENCIA"]
PATIENTS_HEADER = ["ID_PACIENTE", "IC_SEXO", "AA_NASCIMENTO", "CD_PAIS", "CD_UF",
                   "CD_MUNICIPIO", "CD_CEP"]

_REF_FORMATS = ("{lo} a {hi}", "{lo} to {hi}", "{lo} - {hi}")
_QUALITATIVE_TOKENS = ("Indeterminado", "Amostra insuficiente", "<{lo}", "Reagente")
_MOJIBAKE_SUFFIX = " sÃ©rie"  # double-encoded "série"
_MALFORMED_KINDS = ("bad_date", "empty_patient", "wrong_columns")


@dataclass
class Manifest:
    seed: int
    n_patients: int
    n_tests: int
    encoding: str
    rows_quarantined: int
    mojibake_rows: int
    per_analyte: dict[str, dict[str, int | bool]]
    per_month: dict[str, int]
    sex_counts: dict[str, int]
    senior_count: int
    row_labels: list[str] | None = None

    def as_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "n_patients": self.n_patients,
            "n_tests": self.n_tests,
            "encoding": self.encoding,
            "rows_quarantined": self.rows_quarantined,
            "mojibake_rows": self.mojibake_rows,
            "per_analyte": self.per_analyte,
            "per_month": self.per_month,
            "sex_counts": self.sex_counts,
            "senior_count": self.senior_count,
        }
        if self.row_labels is not None:
            d["row_labels"] = self.row_labels
        return d


@dataclass
class GeneratedCorpus:
    patients_path: Path
    tests_path: Path
    manifest_path: Path
    manifest: Manifest


def generate(spec: SynthSpec, outdir: Path) -> GeneratedCorpus:
    """Write patients.csv, tests.csv, and manifest.json under outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)
    enc = "latin-1" if spec.encoding == "latin1" else "utf-8"
    delim = spec.delimiter

    # --- patients ---------------------------------------------------------
    n_f = int(spec.sex_f_rate * spec.n_patients)
    n_senior = int(spec.sentinel_year_rate * spec.n_patients)
    sexes = ["F"] * n_f + ["M"] * (spec.n_patients - n_f)
    rng.shuffle(sexes)
    senior_flags = [True] * n_senior + [False] * (spec.n_patients - n_senior)
    rng.shuffle(senior_flags)
    patient_ids = [f"P{i:07d}" for i in range(spec.n_patients)]

    patients_path = outdir / "patients.csv"
    with open(patients_path, "w", encoding=enc, newline="") as fh:
        fh.write(delim.join(PATIENTS_HEADER) + "\n")
        for pid, sex, senior in zip(patient_ids, sexes, senior_flags):
            year = "AAAA" if senior else str(rng.randint(1931, 2005))
            cep = "CCCC" if rng.random() < 0.1 else f"{rng.randint(0, 99999):05d}"
            fh.write(delim.join([pid, sex, year, "BR", "SP", "SAO PAULO", cep]) + "\n")

    # --- tests ------------------------------------------------------------
    n_days = (spec.date_end - spec.date_start).days + 1
    counts = _allocate(spec.n_tests, [a.weight for a in spec.analytes])

    # Per-analyte row plans: category labels plus orthogonal flags.
    plans: list[list[tuple[str, bool, bool]]] = []  # (category, missing_ref, moji)
    per_analyte: dict[str, dict[str, int | bool]] = {}
    for a, n in zip(spec.analytes, counts):
        d = a.dirt
        c_mal = int(d.malformed_rate * n)
        c_null = int(d.null_rate * n)
        c_qual = int(d.non_numeric_rate * n)
        c_out = int(d.out_of_range_rate * n)
        c_clean = n - c_mal - c_null - c_qual - c_out
        cats = (["malformed"] * c_mal + ["null"] * c_null + ["nonnum"] * c_qual
                + ["outlier"] * c_out + ["clean"] * c_clean)
        rng.shuffle(cats)
        ingested = n - c_mal
        c_noref = int(d.missing_reference_rate * ingested)
        c_moji = int(d.mojibake_rate * ingested)
        noref_flags = [True] * c_noref + [False] * (ingested - c_noref)
        moji_flags = [True] * c_moji + [False] * (ingested - c_moji)
        rng.shuffle(noref_flags)
        rng.shuffle(moji_flags)
        plan = []
        j = 0
        for cat in cats:
            if cat == "malformed":
                plan.append((cat, False, False))
            else:
                plan.append((cat, noref_flags[j], moji_flags[j]))
                j += 1
        plans.append(plan)

        envelope_missing = ingested > 0 and c_noref == ingested
        numeric_only = ingested - c_qual
        not_null = numeric_only - c_null
        in_range = 0 if envelope_missing else not_null - c_out
        per_analyte[a.name] = {
            "initial": ingested,
            "only_numericals": numeric_only,
            "not_null": not_null,
            "in_range": in_range,
            "envelope_missing": envelope_missing,
        }

    # Interleave analytes deterministically across the whole file.
    sequence: list[int] = []
    for i, n in enumerate(counts):
        sequence.extend([i] * n)
    rng.shuffle(sequence)

    per_month: dict[str, int] = {}
    total_mal = 0
    total_moji = 0
    row_labels: list[str] | None = [] if spec.emit_row_labels else None
    cursors = [0] * len(spec.analytes)
    mal_cycle = 0

    tests_path = outdir / "tests.csv"
    with open(tests_path, "w", encoding=enc, newline="") as fh:
        fh.write(delim.join(TESTS_HEADER) + "\n")
        for ai in sequence:
            a = spec.analytes[ai]
            cat, noref, moji = plans[ai][cursors[ai]]
            cursors[ai] += 1
            pid = patient_ids[rng.randrange(spec.n_patients)]
            day = spec.date_start + timedelta(days=rng.randrange(n_days))
            lo, hi = a.range_low, a.range_high

            if cat == "clean":
                v = round(rng.uniform(lo, hi), 2)
                v = min(max(v, lo), hi)
                result = str(v)
            elif cat == "outlier":
                offset = max(hi - lo, 1.0)
                if rng.random() < 0.5:
                    v = round(hi + offset * (1 + rng.random()), 2)
                else:
                    v = round(lo - offset * (1 + rng.random()), 2)
                result = str(v)
            elif cat == "null":
                result = rng.choice(("nan", "NULL", ""))
            elif cat == "nonnum":
                token = rng.choice(_QUALITATIVE_TOKENS)
                result = token.format(lo=lo)
            else:  # malformed
                result = str(round(rng.uniform(lo, hi), 2))

            if noref:
                reference = "nan"
            else:
                reference = rng.choice(_REF_FORMATS).format(lo=lo, hi=hi)
            exam = a.exam + _MOJIBAKE_SUFFIX if moji else a.exam

            row = [pid, day.isoformat(), "HOSP", exam, a.name, result, a.unit,
                   reference]
            if cat == "malformed":
                kind = _MALFORMED_KINDS[mal_cycle % len(_MALFORMED_KINDS)]
                mal_cycle += 1
                if kind == "bad_date":
                    row[1] = "2020-99-99"
                elif kind == "empty_patient":
                    row[0] = ""
                else:
                    row = row[:-1]
                total_mal += 1
            else:
                month = f"{day.year:04d}-{day.month:02d}"
                per_month[month] = per_month.get(month, 0) + 1
                if moji:
                    total_moji += 1
            fh.write(delim.join(row) + "\n")
            if row_labels is not None:
                row_labels.append(cat)

    manifest = Manifest(
        seed=spec.seed,
        n_patients=spec.n_patients,
        n_tests=spec.n_tests,
        encoding=spec.encoding,
        rows_quarantined=total_mal,
        mojibake_rows=total_moji,
        per_analyte=per_analyte,
        per_month=dict(sorted(per_month.items())),
        sex_counts={"F": n_f, "M": spec.n_patients - n_f},
        senior_count=n_senior,
        row_labels=row_labels,
    )
    manifest_path = outdir / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.as_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    return GeneratedCorpus(patients_path, tests_path, manifest_path, manifest)


def fleury_scale_spec(seed: int = 7, **overrides) -> SynthSpec:
    """Preset at the scale of the largest published source (~2.5M test rows)."""
    params = dict(
        seed=seed,
        n_patients=129_596,
        n_tests=2_496_591,
        date_start=date(2019, 11, 1),
        date_end=date(2020, 6, 15),
        analytes=tuple(
            AnalyteSpec(a.name, a.exam, a.unit, a.range_low, a.range_high, a.weight,
                        DirtProfile(null_rate=0.004, non_numeric_rate=0.01,
                                    out_of_range_rate=0.05, malformed_rate=0.002))
            for a in DEFAULT_ANALYTES
        ),
    )
    params.update(overrides)
    return SynthSpec(**params)
