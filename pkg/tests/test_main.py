import logging

import pytest

import nsfem.main as cli
from nsfem.core.errors import ConfigError, StudyError
from nsfem.models.enums import ConvectiveMode, ElementPair, OutputFormat
from nsfem.services.newton_service import iteration_logger


def _config(argv, file=None):
    return cli.parse_config(cli.build_parser().parse_args(["run"] + argv), file)


class TestParseConfig:
    def test_flags(self):
        config = _config(["--p", "1.3", "--element", "ccr", "--convective", "reconstruction", "--levels", "5"])
        assert config.p == 1.3
        assert config.element is ElementPair.CCR_P1DG
        assert config.convective is ConvectiveMode.RECONSTRUCTION
        assert config.levels == 5
        assert config.fmt is OutputFormat.CSV
        assert config.out is None

    def test_newton_overrides(self):
        config = _config(["--p", "1.3", "--max-iters", "80", "--continuation-step", "0.05", "--verbose"])
        assert config.newton.max_iters == 80
        assert config.newton.continuation_step == 0.05
        assert config.verbose and config.newton.verbose

    def test_p_is_required(self):
        with pytest.raises(ConfigError, match="--p is required"):
            _config(["--levels", "2"])

    @pytest.mark.parametrize("argv", [
        ["--p", "0.9"],
        ["--p", "1.3", "--element", "mini"],
        ["--p", "1.3", "--levels", "6"],
        ["--p", "1.3", "--max-iters", "0"],
    ])
    def test_invalid_values(self, argv):
        with pytest.raises(ConfigError):
            _config(argv)

    def test_full_tables_unlock_deep_levels(self):
        assert _config(["--p", "1.3", "--levels", "7", "--full-tables"]).levels == 7


class TestConfigFile:
    def test_file_values_and_flag_override(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("# BR1 study\np = 1.4\nelement = br1\nlevels = 2  # coarse\nfull-tables = yes\n")
        config = _config(["--levels", "3"], path)
        assert config.p == 1.4
        assert config.element is ElementPair.BR1_P0
        assert config.levels == 3
        assert config.full_tables

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("p = 1.4\nsmoother = jacobi\n")
        with pytest.raises(ConfigError, match="unknown key 'smoother'"):
            cli.read_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("p 1.4\n")
        with pytest.raises(ConfigError, match="key = value"):
            cli.read_config_file(path)

    def test_bad_boolean(self, tmp_path):
        path = tmp_path / "study.cfg"
        path.write_text("p = 1.4\nverbose = maybe\n")
        with pytest.raises(ConfigError):
            _config([], path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            cli.read_config_file(tmp_path / "absent.cfg")


class TestMain:
    @pytest.fixture
    def fake_study(self, monkeypatch, sample_report):
        calls = []

        def fake(config):
            calls.append(config)
            return sample_report(element=config.element, convective=config.convective)

        monkeypatch.setattr(cli, "run_study", fake)
        return calls

    def test_usage_error(self, capsys):
        assert cli.main(["run", "--p", "0.9"]) == cli.EXIT_USAGE
        assert "p must be > 1" in capsys.readouterr().err

    def test_csv_to_stdout(self, fake_study, capsys):
        assert cli.main(["run", "--p", "1.5", "--levels", "1"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "level,h,ndof,newton_iters,eF,eq_lp,eq_l2,eocF,eoc_lp,eoc_l2"
        assert fake_study[0].levels == 1

    def test_markdown_to_file(self, fake_study, tmp_path):
        out = tmp_path / "table.md"
        assert cli.main(["run", "--p", "1.5", "--format", "md", "--out", str(out)]) == cli.EXIT_OK
        assert out.read_text().strip().splitlines()[-1].startswith("| theory |")

    def test_parquet_defaults_to_output_dir(self, fake_study, tmp_path, monkeypatch):
        monkeypatch.setattr(cli.settings, "OUTPUT_DIR", str(tmp_path))
        assert cli.main(["run", "--p", "1.5", "--element", "p2p0", "--format", "parquet"]) == cli.EXIT_OK
        assert (tmp_path / "study_p2p0_reconstruction_p1.5.parquet").exists()

    def test_temam_warning_below_admissible_range(self, fake_study, caplog):
        with caplog.at_level(logging.WARNING, logger="nsfem.main"):
            assert cli.main(["run", "--p", "1.1", "--convective", "temam"]) == cli.EXIT_OK
        assert any("4/3" in record.getMessage() for record in caplog.records)

    def test_no_warning_for_reconstruction(self, fake_study, caplog):
        with caplog.at_level(logging.WARNING, logger="nsfem.main"):
            cli.main(["run", "--p", "1.1"])
        assert not caplog.records

    def test_verbose_routes_iteration_lines_without_prefix(self, fake_study):
        try:
            assert cli.main(["run", "--p", "1.5", "--verbose"]) == cli.EXIT_OK
            handlers = iteration_logger.handlers
            assert len(handlers) == 1
            assert handlers[0].formatter._fmt == "%(message)s"
            assert not iteration_logger.propagate
        finally:
            for handler in list(iteration_logger.handlers):
                iteration_logger.removeHandler(handler)
            iteration_logger.propagate = True

    def test_solver_failure(self, monkeypatch, capsys):
        def failing(config):
            raise StudyError("Newton did not converge", 3)

        monkeypatch.setattr(cli, "run_study", failing)
        assert cli.main(["run", "--p", "1.2"]) == cli.EXIT_SOLVER_FAILURE
        assert "error: level 3: Newton did not converge" in capsys.readouterr().err

    def test_io_failure(self, fake_study, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("")
        out = blocker / "table.csv"
        assert cli.main(["run", "--p", "1.5", "--out", str(out)]) == cli.EXIT_IO
