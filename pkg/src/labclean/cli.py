"""Command-line surface: profile, clean, synth, report.

Exit codes: 0 success, 1 usage or config error, 2 data error (missing or
undecodable input). Logs go to stderr as line-delimited key=value records;
data goes only to files and stdout.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import ingest, profiling, report, synthgen
from .cleanse import PipelineConfig, run_pipeline
from .schema import Numeric
from .valueparse import parse_result

logger = logging.getLogger("labclean")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def _ingest_config(args) -> ingest.IngestConfig:
    return ingest.IngestConfig(
        delimiter=args.delimiter,
        encoding_policy=args.encoding,
        fix_mojibake=args.fix_mojibake,
    )


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--kind", choices=["patient", "tests", "outcome"], default="tests")
    p.add_argument("--delimiter", default="|")
    p.add_argument("--encoding", choices=["strict-utf8", "utf8-then-latin1"],
                   default="utf8-then-latin1")
    p.add_argument("--fix-mojibake", action="store_true")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="parallelism hint; outputs are identical for any value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labclean")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="profile a dataset")
    _add_input_flags(p)
    _add_common_flags(p)
    p.add_argument("--reference-year", type=int, default=2020)
    p.add_argument("--covid-vocab", type=Path)
    p.add_argument("--top-k", type=int, default=20)

    p = sub.add_parser("clean", help="run the staged cleaning pipeline")
    _add_input_flags(p)
    _add_common_flags(p)
    p.add_argument("--std-k", type=float, help="enable the std-clip stage")

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True, type=Path)
    _add_common_flags(p)

    p = sub.add_parser("report", help="re-render emitted artifacts")
    p.add_argument("--reduction", type=Path, help="reduction.csv to print as markdown")
    p.add_argument("--profile", type=Path, help="profile.json to render boxplots.svg from")
    _add_common_flags(p)
    return parser


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_profile(args) -> int:
    if not args.input.exists():
        logger.error("input file not found: %s", args.input)
        return EXIT_DATA
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    config = _ingest_config(args)
    try:
        if args.kind == "patient":
            stream, rep = ingest.load_patients(args.input, config)
            patients = list(stream)
            rows = [
                {
                    "patient_id": p.patient_id,
                    "sex": p.sex.value,
                    "birth_year": str(p.birth_year.value
                                      if hasattr(p.birth_year, "value")
                                      else p.birth_year),
                    "country": p.country,
                    "state": p.state,
                }
                for p in patients
            ]
            doc = report.profile_document(
                column_summaries=profiling.describe(rows),
                sex=profiling.sex_distribution(patients),
                ages=profiling.age_distribution(patients, args.reference_year),
            )
        elif args.kind == "tests":
            stream, rep = ingest.load_tests(args.input, config)
            tests = list(stream)
            rows = [
                {
                    "patient_id": t.patient_id,
                    "collected_on": t.collected_on.isoformat(),
                    "origin": t.origin,
                    "exam": t.exam,
                    "analyte": t.analyte,
                    "raw_result": t.raw_result,
                    "unit": t.unit or "",
                    "raw_reference": t.raw_reference or "",
                }
                for t in tests
            ]
            vocab = (profiling.CovidVocabulary.from_file(args.covid_vocab)
                     if args.covid_vocab else profiling.CovidVocabulary.default())
            values_by_analyte: dict[str, list[float]] = {}
            for t in tests:
                parsed = parse_result(t.raw_result)
                if isinstance(parsed, Numeric):
                    values_by_analyte.setdefault(t.analyte, []).append(parsed.value)
            top14 = sorted(values_by_analyte, key=lambda a: (-len(values_by_analyte[a]), a))[:14]
            boxes = [profiling.boxplot_stats(values_by_analyte[a], analyte=a)
                     for a in top14]
            per_month = profiling.exams_per_period(tests, "month")
            doc = report.profile_document(
                column_summaries=profiling.describe(rows),
                per_period=per_month,
                top_exams=profiling.top_k_by_month(tests, "exam", args.top_k),
                top_analytes=profiling.top_k_by_month(tests, "analyte", args.top_k),
                covid=profiling.covid_by_month(tests, vocab),
                boxplots=boxes,
            )
            with open(out / "exams_per_month.csv", "w", encoding="utf-8",
                      newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["month", "count"])
                for month, count in per_month.items():
                    w.writerow([month, count])
        else:
            stream, rep = ingest.load_outcomes(args.input, config)
            outcomes = list(stream)
            rows = [
                {"patient_id": o.patient_id,
                 "occurred_on": o.occurred_on.isoformat(),
                 "description": o.description}
                for o in outcomes
            ]
            doc = report.profile_document(column_summaries=profiling.describe(rows))
    except (ingest.IngestError, OSError) as exc:
        logger.error("cannot ingest %s: %s", args.input, exc)
        return EXIT_DATA
    doc["ingest_report"] = rep.as_dict()
    _write(out / "profile.json", report.render_profile_json(doc))
    logger.info("profiled rows_ok=%d rows_quarantined=%d encoding=%s",
                rep.rows_ok, rep.rows_quarantined, rep.encoding_used)
    return EXIT_OK


def cmd_clean(args) -> int:
    if not args.input.exists():
        logger.error("input file not found: %s", args.input)
        return EXIT_DATA
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    config = _ingest_config(args)
    pipeline_config = PipelineConfig(std_multiplier=args.std_k)
    last_report = {}

    def record_stream():
        stream, rep = ingest.load_tests(args.input, config)
        last_report["report"] = rep
        return stream

    final_stage = "std_clip" if args.std_k is not None else "range"
    cleaned_path = out / "cleaned.csv"
    rejects_path = out / "rejects.csv"
    try:
        with open(cleaned_path, "w", encoding="utf-8", newline="") as cfh, \
                open(rejects_path, "w", encoding="utf-8", newline="") as rfh:
            cw = csv.writer(cfh, delimiter=args.delimiter, lineterminator="\n")
            rw = csv.writer(rfh, lineterminator="\n")
            cw.writerow(["patient_id", "collected_on", "origin", "exam", "analyte",
                         "raw_result", "unit", "raw_reference", "clean_stage_passed"])
            rw.writerow(["patient_id", "analyte", "raw_result", "stage", "reason"])
            result = run_pipeline(
                record_stream,
                pipeline_config,
                cleaned_sink=lambda t: cw.writerow(
                    [t.patient_id, t.collected_on.isoformat(), t.origin, t.exam,
                     t.analyte, t.raw_result, t.unit or "", t.raw_reference or "",
                     final_stage]
                ),
                rejects_sink=lambda r: rw.writerow(
                    [r.patient_id, r.analyte, r.raw_result, r.stage, r.reason.value]
                ),
            )
    except (ingest.IngestError, OSError) as exc:
        logger.error("cannot clean %s: %s", args.input, exc)
        return EXIT_DATA

    _write(out / "reduction.csv", report.emit_reduction_table(result.reduction, "csv"))
    sys.stdout.write(report.emit_reduction_table(result.reduction, "markdown"))
    rep = last_report["report"]
    logger.info(
        "cleaned analytes=%d no_reference=%d reference_parse_misses=%d "
        "rows_quarantined=%d",
        len(result.reduction), len(result.no_reference_analytes),
        result.reference_parse_misses, rep.rows_quarantined,
    )
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        spec = synthgen.load_spec(args.spec)
    except FileNotFoundError:
        logger.error("spec file not found: %s", args.spec)
        return EXIT_USAGE
    except synthgen.InvalidSpec as exc:
        logger.error("invalid spec %s: %s", args.spec, exc)
        return EXIT_USAGE
    corpus = synthgen.generate(spec, args.out)
    logger.info("generated tests=%s patients=%s manifest=%s",
                corpus.tests_path, corpus.patients_path, corpus.manifest_path)
    return EXIT_OK


def cmd_report(args) -> int:
    if args.reduction is None and args.profile is None:
        logger.error("report needs --reduction and/or --profile")
        return EXIT_USAGE
    import json

    if args.reduction is not None:
        if not args.reduction.exists():
            logger.error("file not found: %s", args.reduction)
            return EXIT_DATA
        rows = report.parse_reduction_csv(args.reduction.read_text(encoding="utf-8"))
        sys.stdout.write(report.emit_reduction_table(rows, "markdown"))
    if args.profile is not None:
        if not args.profile.exists():
            logger.error("file not found: %s", args.profile)
            return EXIT_DATA
        doc = json.loads(args.profile.read_text(encoding="utf-8"))
        boxes = [
            profiling.BoxplotStats(
                b["analyte"], b["q1"], b["median"], b["q3"], b["whisker_low"],
                b["whisker_high"], tuple(b["outliers"]), b["n"],
            )
            for b in doc.get("boxplots", [])
        ]
        if not boxes:
            logger.error("profile has no boxplot stats: %s", args.profile)
            return EXIT_DATA
        args.out.mkdir(parents=True, exist_ok=True)
        _write(args.out / "boxplots.svg", report.emit_boxplot_svg(boxes))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format='level=%(levelname)s logger=%(name)s msg="%(message)s"',
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "profile": cmd_profile,
        "clean": cmd_clean,
        "synth": cmd_synth,
        "report": cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
