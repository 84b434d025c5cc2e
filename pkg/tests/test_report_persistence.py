import io

import pandas as pd
import pytest

from nsfem.models.enums import ConvectiveMode, ElementPair, OutputFormat
from nsfem.services.report_persistence import CSV_COLUMNS, DIAGNOSTIC_COLUMNS, report_persistence


class TestCsv:
    def test_header_and_rows(self, sample_report):
        lines = report_persistence.render_csv(sample_report()).splitlines()
        assert lines[0] == "level,h,ndof,newton_iters,eF,eq_lp,eq_l2,eocF,eoc_lp,eoc_l2"
        assert len(lines) == 3

    def test_first_level_has_no_rates(self, sample_report):
        frame = pd.read_csv(io.StringIO(report_persistence.render_csv(sample_report())))
        assert frame.loc[0, ["eocF", "eoc_lp", "eoc_l2"]].isna().all()
        assert frame.loc[1, "eocF"] == pytest.approx(1.0)
        assert frame.loc[1, "eoc_lp"] == pytest.approx(0.5)
        assert list(frame["ndof"]) == [100, 200]

    def test_errors_keep_full_precision(self, sample_report):
        frame = pd.read_csv(io.StringIO(report_persistence.render_csv(sample_report())))
        assert frame.loc[1, "eq_lp"] == 0.4 * 0.5**0.5


class TestMarkdown:
    def test_table_layout(self, sample_report):
        text = report_persistence.render_markdown(
            sample_report(element=ElementPair.BR1_P0, convective=ConvectiveMode.TEMAM)
        )
        lines = text.strip().splitlines()
        assert lines[0] == "## br1 / temam, p = 1.5, delta = 1e-05, nu0 = 100"
        assert lines[2].startswith("| level | h | ndof |")
        assert lines[4].startswith("| 0 | 1.000 | 100 | 7 | 2.000e-01 |")
        assert lines[5].startswith("| 1 | 0.500 | 200 | 6 | 1.000e-01 |")
        assert lines[5].endswith("| 1.000 | 0.500 | 1.000 |")

    def test_theory_row(self, sample_report):
        last = report_persistence.render_markdown(sample_report()).strip().splitlines()[-1]
        assert last == "| theory | | | | | | | 1.000 | 0.667 | 1.000 |"

    def test_render_dispatch(self, sample_report):
        report = sample_report()
        assert report_persistence.render(report, OutputFormat.MD).startswith("## ccr / reconstruction")
        assert report_persistence.render(report, "csv").startswith("level,h")
        with pytest.raises(ValueError):
            report_persistence.render(report, OutputFormat.PARQUET)


class TestWrite:
    def test_parquet_carries_diagnostics(self, sample_report, tmp_path):
        path = report_persistence.write(sample_report(), tmp_path / "study.parquet", OutputFormat.PARQUET)
        frame = pd.read_parquet(path)
        assert list(frame.columns) == CSV_COLUMNS + DIAGNOSTIC_COLUMNS
        assert frame["chunkiness"].iloc[0] == pytest.approx(4.828427)
        assert frame["modular_F"].iloc[1] == pytest.approx(0.0025)

    def test_creates_parent_directories(self, sample_report, tmp_path):
        path = tmp_path / "nested" / "dir" / "study.md"
        report_persistence.write(sample_report(), path, OutputFormat.MD)
        assert path.read_text().startswith("## ccr")

    def test_no_temporary_left_behind(self, sample_report, tmp_path):
        path = tmp_path / "study.csv"
        report_persistence.write(sample_report(), path, OutputFormat.CSV)
        assert [p.name for p in tmp_path.iterdir()] == ["study.csv"]

    def test_failed_write_keeps_previous_file(self, sample_report, tmp_path, monkeypatch):
        path = tmp_path / "study.csv"
        path.write_text("previous")

        def boom(report):
            raise OSError("disk full")

        monkeypatch.setattr(report_persistence, "render_csv", boom)
        with pytest.raises(OSError):
            report_persistence.write(sample_report(), path, OutputFormat.CSV)
        assert path.read_text() == "previous"
        assert [p.name for p in tmp_path.iterdir()] == ["study.csv"]
