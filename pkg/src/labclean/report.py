"""Stable serialization of reduction tables, profiles, and plot artifacts.

Numbers always serialize with a "." decimal separator; counts as plain
integers. Emission is deterministic for fixed input.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

from .profiling import BoxplotStats
from .schema import ReductionRow, reduction_pct

REDUCTION_COLUMNS = ["analyte", "initial", "only_numericals", "not_null", "range",
                     "reduction"]


class EmptyInput(ValueError):
    pass


def total_row(rows: Sequence[ReductionRow]) -> ReductionRow:
    initial = sum(r.initial for r in rows)
    numeric = sum(r.numeric_only for r in rows)
    not_null = sum(r.not_null for r in rows)
    in_range = sum(r.in_range for r in rows)
    return ReductionRow.from_counts("Total", initial, numeric, not_null, in_range)


def _fmt_pct(x: float) -> str:
    return f"{x:.2f}"


def emit_reduction_table(rows: Sequence[ReductionRow], format: str = "csv") -> str:
    """Render the reduction table with a final total row."""
    total = total_row(rows)
    all_rows = list(rows) + [total]
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REDUCTION_COLUMNS)
        for r in all_rows:
            w.writerow([r.analyte, r.initial, r.numeric_only, r.not_null, r.in_range,
                        _fmt_pct(r.reduction_pct)])
        return buf.getvalue()
    if format == "markdown":
        lines = ["| " + " | ".join(REDUCTION_COLUMNS) + " |",
                 "|" + "|".join(["---"] * len(REDUCTION_COLUMNS)) + "|"]
        for r in all_rows:
            lines.append(
                f"| {r.analyte} | {r.initial} | {r.numeric_only} | {r.not_null} "
                f"| {r.in_range} | {_fmt_pct(r.reduction_pct)} |"
            )
        return "\n".join(lines) + "\n"
    if format == "structured":
        return json.dumps(
            {
                "columns": REDUCTION_COLUMNS,
                "rows": [
                    {
                        "analyte": r.analyte,
                        "initial": r.initial,
                        "only_numericals": r.numeric_only,
                        "not_null": r.not_null,
                        "range": r.in_range,
                        "reduction": round(r.reduction_pct, 2),
                    }
                    for r in all_rows
                ],
            },
            ensure_ascii=False,
            indent=2,
        ) + "\n"
    raise ValueError(f"unknown format: {format}")


def parse_reduction_csv(text: str) -> list[ReductionRow]:
    """Inverse of the csv emitter; the trailing total row is dropped and
    re-derivable via total_row."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != REDUCTION_COLUMNS:
        raise ValueError(f"unexpected reduction header: {header}")
    rows = []
    for rec in reader:
        rows.append(
            ReductionRow(rec[0], int(rec[1]), int(rec[2]), int(rec[3]), int(rec[4]),
                         float(rec[5]))
        )
    if rows and rows[-1].analyte == "Total":
        rows.pop()
    return rows


def profile_document(
    column_summaries=None,
    sex=None,
    ages=None,
    per_period=None,
    top_exams=None,
    top_analytes=None,
    covid=None,
    boxplots: Sequence[BoxplotStats] | None = None,
) -> dict:
    """Assemble the profile output document with stable key names."""
    doc: dict = {}
    if column_summaries is not None:
        doc["columns"] = [
            {
                "name": s.name,
                "count": s.count,
                "distinct": s.distinct,
                "mode": s.mode,
                "mode_freq": s.mode_freq,
            }
            for s in column_summaries
        ]
    if sex is not None:
        doc["sex_distribution"] = sex
    if ages is not None:
        doc["age_distribution"] = {
            "reference_year": ages.reference_year,
            "histogram": {str(k): v for k, v in ages.histogram.items()},
            "senior_bucket": ages.senior_bucket,
        }
    if per_period is not None:
        doc["exams_per_period"] = per_period
    if top_exams is not None:
        doc["top_exams_by_month"] = {
            m: [{"value": v, "count": c} for v, c in pairs]
            for m, pairs in top_exams.items()
        }
    if top_analytes is not None:
        doc["top_analytes_by_month"] = {
            m: [{"value": v, "count": c} for v, c in pairs]
            for m, pairs in top_analytes.items()
        }
    if covid is not None:
        doc["covid_by_month"] = covid
    if boxplots is not None:
        doc["boxplots"] = [
            {
                "analyte": b.analyte,
                "q1": b.q1,
                "median": b.median,
                "q3": b.q3,
                "whisker_low": b.whisker_low,
                "whisker_high": b.whisker_high,
                "outliers": list(b.outliers),
                "n": b.n,
            }
            for b in boxplots
        ]
    return doc


def render_profile_json(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, ensure_ascii=False, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ReportBundle:
    reduction: list[ReductionRow]
    profile: dict
    boxplots: list[BoxplotStats] = field(default_factory=list)
    tool_version: str = "0.1.0"
    config: dict = field(default_factory=dict)
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def metadata(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "config_hash": config_hash(self.config),
            "created_at": self.created_at,
        }

    def validate(self) -> None:
        # total row must equal column-wise sums with the pct recomputed
        t = total_row(self.reduction)
        assert t.reduction_pct == reduction_pct(t.initial, t.in_range)


# --- SVG boxplots ----------------------------------------------------------


def _f(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def emit_boxplot_svg(
    stats: Sequence[BoxplotStats],
    width: int = 120,
    height: int = 320,
    margin: int = 30,
) -> str:
    """Deterministic SVG with one box-and-whiskers group per analyte."""
    if not stats:
        raise EmptyInput("emit_boxplot_svg requires at least one analyte")
    lo = min(min(s.whisker_low, *(s.outliers or (s.whisker_low,))) for s in stats)
    hi = max(max(s.whisker_high, *(s.outliers or (s.whisker_high,))) for s in stats)
    span = hi - lo or 1.0
    total_w = margin * 2 + width * len(stats)
    plot_h = height - 2 * margin

    def y(v: float) -> float:
        return margin + plot_h * (1 - (v - lo) / span)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" '
        f'height="{height}" viewBox="0 0 {total_w} {height}">'
    ]
    for i, s in enumerate(stats):
        cx = margin + width * i + width / 2
        bw = width * 0.5
        x0, x1 = cx - bw / 2, cx + bw / 2
        g = [f'<g class="box" data-analyte="{s.analyte}">']
        g.append(
            f'<line x1="{_f(cx)}" y1="{_f(y(s.whisker_low))}" x2="{_f(cx)}" '
            f'y2="{_f(y(s.whisker_high))}" stroke="black"/>'
        )
        for wv in (s.whisker_low, s.whisker_high):
            g.append(
                f'<line x1="{_f(x0)}" y1="{_f(y(wv))}" x2="{_f(x1)}" '
                f'y2="{_f(y(wv))}" stroke="black"/>'
            )
        box_top, box_bot = y(s.q3), y(s.q1)
        g.append(
            f'<rect x="{_f(x0)}" y="{_f(box_top)}" width="{_f(bw)}" '
            f'height="{_f(max(box_bot - box_top, 0.0))}" fill="white" stroke="black"/>'
        )
        g.append(
            f'<line x1="{_f(x0)}" y1="{_f(y(s.median))}" x2="{_f(x1)}" '
            f'y2="{_f(y(s.median))}" stroke="black"/>'
        )
        for o in s.outliers:
            g.append(f'<circle cx="{_f(cx)}" cy="{_f(y(o))}" r="2" fill="black"/>')
        g.append(
            f'<text x="{_f(cx)}" y="{height - 8}" text-anchor="middle" '
            f'font-size="10">{s.analyte}</text>'
        )
        g.append("</g>")
        parts.extend(g)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
