"""Tests for report formatting and output."""

import json
import math
import os
import tempfile

import pytest

from fracdiff_cldg.api import ConvergenceRow, ConvergenceTable, StabilityReport
from fracdiff_cldg.report import (
    emit_report,
    emit_stability_report,
    format_csv,
    format_json,
    format_table,
)


def _table() -> ConvergenceTable:
    rows = [
        ConvergenceRow(8, 3.860e-4, 3.9e-4),
        ConvergenceRow(16, 7.364e-5, 7.4e-5, 2.3901, 2.3980),
        ConvergenceRow(32, math.nan, math.nan, math.nan, math.nan, failure="non-finite"),
    ]
    return ConvergenceTable(rows, {"problem": "example1", "alpha": 1.1, "k": 1})


class TestFormatCsv:
    """Tests for format_csv."""

    def test_header_only_for_empty_table(self) -> None:
        """Test that an empty study has just the header."""
        assert format_csv(ConvergenceTable([])) == "inv_h,E1,rate1,E2,rate2\n"

    def test_rows(self) -> None:
        """Test the first row's empty rates and the failed row's nan values."""
        lines = format_csv(_table()).splitlines()
        assert lines[1] == "8,3.860000e-04,,3.900000e-04,"
        assert lines[2] == "16,7.364000e-05,2.3901,7.400000e-05,2.3980"
        assert lines[3] == "32,nan,nan,nan,nan"


class TestFormatJson:
    """Tests for format_json."""

    def test_nan_becomes_null(self) -> None:
        """Test that undefined values are written as null."""
        payload = json.loads(format_json(_table()))
        assert payload["metadata"]["problem"] == "example1"
        assert payload["rows"][0]["rate1"] is None
        assert payload["rows"][1]["E1"] == pytest.approx(7.364e-5)
        assert payload["rows"][2]["E2"] is None
        assert payload["rows"][2]["failure"] == "non-finite"


class TestFormatTable:
    """Tests for the console table."""

    def test_layout(self) -> None:
        """Test the metadata line, header, placeholders and failure text."""
        lines = format_table(_table()).splitlines()
        assert lines[0].startswith("example1: alpha=1.1")
        assert lines[1].split() == ["1/h", "E1", "rate1", "E2", "rate2"]
        assert lines[2].split()[2] == "-"
        assert lines[4].endswith("non-finite")

    def test_color_marks_failures(self) -> None:
        """Test that failed rows are colored on request."""
        assert "\033[91m" in format_table(_table(), color=True)
        assert "\033[91m" not in format_table(_table())


class TestEmit:
    """Tests for writing reports."""

    def test_writes_nested_path(self) -> None:
        """Test that missing directories are created."""
        with tempfile.TemporaryDirectory() as tmpdir:
            out = os.path.join(tmpdir, "results", "table.csv")
            text = emit_report(_table(), "csv", out)
            with open(out, "r", encoding="utf-8") as f:
                assert f.read() == text

    def test_returns_text_without_out(self) -> None:
        """Test that no file is needed."""
        assert emit_report(_table(), "json").startswith("{")

    def test_unknown_format(self) -> None:
        """Test that unknown formats are rejected."""
        with pytest.raises(ValueError):
            emit_report(_table(), "xml")

    def test_energy_csv(self) -> None:
        """Test the (t, energy) series."""
        report = StabilityReport(8, [0.0, 0.5], [2.0, 1.5], True, 0.0)
        assert emit_stability_report(report) == "t,energy\n0.0,2.0\n0.5,1.5\n"

    def test_stability_json(self) -> None:
        """Test the JSON verdict of a failed run."""
        report = StabilityReport(8, [], [], False, math.inf, "non-finite solution")
        payload = json.loads(emit_stability_report(report, "json"))
        assert payload["non_increasing"] is False
        assert payload["max_increment"] is None
        assert payload["violation"] == "non-finite solution"
