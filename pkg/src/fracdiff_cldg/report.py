"""Convergence and stability reports: console text, CSV and JSON."""

import csv
import io
import json
import logging
import math
import os
from typing import Any

from fracdiff_cldg.api import ConvergenceTable, StabilityReport
from fracdiff_cldg.config.constants import COLORS, CONSTANTS

logger = logging.getLogger(__name__)


def _error_text(value: float) -> str:
    return "nan" if math.isnan(value) else f"{value:.6e}"


def _rate_text(value: float | None) -> str:
    if value is None:
        return ""
    return "nan" if math.isnan(value) else f"{value:.4f}"


def _finite_or_none(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return value


def format_csv(table: ConvergenceTable) -> str:
    """Rows as CSV with columns inv_h, E1, rate1, E2, rate2.

    The first row's rates are empty; failed meshes show nan errors.
    """
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CONSTANTS.CSV_COLUMNS)
    for row in table.rows:
        writer.writerow(
            [
                row.inv_h,
                _error_text(row.e1),
                _rate_text(row.rate1),
                _error_text(row.e2),
                _rate_text(row.rate2),
            ]
        )
    return output.getvalue()


def format_json(table: ConvergenceTable) -> str:
    """Metadata and rows as JSON; undefined rates and failed errors are null."""
    rows = [
        {
            "inv_h": row.inv_h,
            "E1": _finite_or_none(row.e1),
            "rate1": _finite_or_none(row.rate1),
            "E2": _finite_or_none(row.e2),
            "rate2": _finite_or_none(row.rate2),
            "failure": row.failure,
        }
        for row in table.rows
    ]
    return json.dumps({"metadata": table.metadata, "rows": rows}, indent=2) + "\n"


def format_table(table: ConvergenceTable, color: bool = False) -> str:
    """Aligned plain-text table for the console."""
    meta = table.metadata
    lines = []
    if meta:
        lines.append(
            f"{meta.get('problem', '?')}: alpha={meta.get('alpha')} beta={meta.get('beta')} "
            f"k={meta.get('k')} T={meta.get('t_final')} integrator={meta.get('integrator')}"
        )
    lines.append(f"{'1/h':>6}  {'E1':>12}  {'rate1':>7}  {'E2':>12}  {'rate2':>7}")
    for row in table.rows:
        line = (
            f"{row.inv_h:>6}  {_error_text(row.e1):>12}  {_rate_text(row.rate1) or '-':>7}  "
            f"{_error_text(row.e2):>12}  {_rate_text(row.rate2) or '-':>7}"
        )
        if row.failure:
            line += f"  {row.failure}"
            if color:
                line = f"{COLORS.RED}{line}{COLORS.RESET}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def format_energy_csv(report: StabilityReport) -> str:
    """(t, energy) series as CSV."""
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(("t", "energy"))
    for t, value in zip(report.times, report.energies):
        writer.writerow((repr(t), repr(value)))
    return output.getvalue()


def format_stability_json(report: StabilityReport) -> str:
    payload: dict[str, Any] = {
        "inv_h": report.inv_h,
        "non_increasing": report.non_increasing,
        "max_increment": _finite_or_none(report.max_increment),
        "violation": report.violation,
        "times": report.times,
        "energies": report.energies,
    }
    return json.dumps(payload, indent=2) + "\n"


def _write(text: str, out: str | None) -> str:
    if out:
        directory = os.path.dirname(out)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Report written to {out}")
    return text


def emit_report(table: ConvergenceTable, fmt: str = "csv", out: str | None = None) -> str:
    """Format a convergence table and write it to ``out`` if given.

    Args:
        table: Study result.
        fmt: "csv" or "json".
        out: Target file; None only returns the text.

    Returns:
        The formatted report.

    Raises:
        ValueError: For an unknown format.
        OSError: If the file cannot be written.
    """
    if fmt == "csv":
        return _write(format_csv(table), out)
    if fmt == "json":
        return _write(format_json(table), out)
    raise ValueError(f"Unknown report format {fmt!r}")


def emit_stability_report(report: StabilityReport, fmt: str = "csv", out: str | None = None) -> str:
    """Format an energy trace (CSV series, or JSON with the verdict) and write it if asked."""
    if fmt == "csv":
        return _write(format_energy_csv(report), out)
    if fmt == "json":
        return _write(format_stability_json(report), out)
    raise ValueError(f"Unknown report format {fmt!r}")
