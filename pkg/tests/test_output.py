"""
Tests for CSV and SVG result files.
"""

import math

import pytest

from hidex.errors import OutputError, ParameterError
from hidex.models import Metric, ResultRow
from hidex.output import CSV_HEADER, read_rows, render_outputs, write_csv


def _row(receiver: str, snr_db: float, value: float, metric: Metric = Metric.BER) -> ResultRow:
    return ResultRow(
        scenario="uncoded",
        receiver=receiver,
        snr_db=snr_db,
        sinr_db=-0.1 * snr_db,
        metric=metric,
        value=value,
        count=480,
        trials=40,
        seed=7,
    )


@pytest.fixture
def rows():
    return [
        _row("bp", 10.0, 0.1 / 3),
        _row("mmse", 10.0, 0.2),
        _row("bp", 20.0, 1e-3),
        _row("mmse", 20.0, 0.05),
    ]


class TestCsv:
    """Tests for the CSV writer and reader."""

    def test_header(self, rows, tmp_path):
        """The first line is the fixed column list."""
        path = write_csv(rows, tmp_path / "out.csv")
        assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)

    def test_rows_read_back_exactly(self, rows, tmp_path):
        """Floats survive the file bit for bit."""
        path = write_csv(rows, tmp_path / "out.csv")
        assert read_rows(path) == rows

    def test_non_finite_values(self, tmp_path):
        """Undefined and infinite ratios are written and read back."""
        rows = [_row("mmse/bp", 20.0, math.inf, Metric.BER_RATIO), _row("mmse/bp", 25.0, math.nan, Metric.BER_RATIO)]
        loaded = read_rows(write_csv(rows, tmp_path / "ratio.csv"))
        assert math.isinf(loaded[0].value)
        assert math.isnan(loaded[1].value)

    def test_bad_header(self, tmp_path):
        """Files from elsewhere are rejected."""
        path = tmp_path / "other.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(OutputError):
            read_rows(path)

    def test_missing_file(self, tmp_path):
        """A missing file is an output error, not a bare OSError."""
        with pytest.raises(OutputError) as exc_info:
            read_rows(tmp_path / "missing.csv")
        assert exc_info.value.path.endswith("missing.csv")


class TestRenderOutputs:
    """Tests for multi-format rendering."""

    def test_both_formats(self, rows, tmp_path):
        """One file per format, sharing the stem."""
        written = render_outputs(rows, tmp_path / "ber", ("csv", "svg"))
        assert [p.name for p in written] == ["ber.csv", "ber.svg"]

    def test_svg_series_ids(self, rows, tmp_path):
        """Each receiver's line can be found by id."""
        (svg,) = render_outputs(rows, tmp_path / "ber", ("svg",))
        text = svg.read_text()
        assert 'id="series-bp"' in text
        assert 'id="series-mmse"' in text

    def test_replaces_suffix(self, rows, tmp_path):
        """A .csv stem is not doubled up."""
        (path,) = render_outputs(rows, tmp_path / "ber.csv", ("csv",))
        assert path.name == "ber.csv"

    def test_creates_directories(self, rows, tmp_path):
        """Missing parent directories are created."""
        (path,) = render_outputs(rows, tmp_path / "nested" / "dir" / "ber", ("csv",))
        assert path.exists()

    def test_zero_values_leave_gaps(self, tmp_path):
        """Error-free points cannot sit on a log axis but still render."""
        rows = [_row("bp", 10.0, 0.01), _row("bp", 20.0, 0.0)]
        (svg,) = render_outputs(rows, tmp_path / "gap", ("svg",))
        assert 'id="series-bp"' in svg.read_text()

    def test_rejects_empty(self, tmp_path):
        """Nothing to plot is a parameter error."""
        with pytest.raises(ParameterError):
            render_outputs([], tmp_path / "empty")

    def test_rejects_unknown_format(self, rows, tmp_path):
        """Only csv and svg are known."""
        with pytest.raises(ParameterError):
            render_outputs(rows, tmp_path / "ber", ("csv", "png"))
