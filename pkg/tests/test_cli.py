import numpy as np

from vrft_lab.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    _load_config_file,
    _parse_eps_grid,
    main,
)
from vrft_lab.errors import ConfigError

import pytest


class TestParsing:
    def test_eps_grid(self):
        assert _parse_eps_grid("0.05:0.1, 0.1:0.2") == ((0.05, 0.1), (0.1, 0.2))
        with pytest.raises(ConfigError):
            _parse_eps_grid("0.05")
        with pytest.raises(ConfigError):
            _parse_eps_grid("")

    def test_config_file(self, tmp_path):
        p = tmp_path / "study.ini"
        p.write_text(
            "[study]\n"
            "scenarios = A, B\n"
            "n_points = 100\n"
            "n_seeds = 3\n"
            "master_seed = 11\n"
            "weeks = 1\n"
            f"output_dir = {tmp_path / 'out'}\n"
            "[attack]\n"
            "eps_grid = 0.1:0.2\n"
            "budget_y_reference = output_norm\n"
            "[plant]\n"
            "q_person = 450\n")
        opts = _load_config_file(p)
        assert opts["scenarios"] == ("A", "B")
        assert opts["n_points"] == (100,)
        assert opts["attack_grid"] == ((0.1, 0.2),)
        assert opts["budget_y_reference"] == "output_norm"
        assert opts["plant"].q_person == 450.0

    def test_unknown_plant_field_is_config_error(self, tmp_path):
        p = tmp_path / "study.ini"
        p.write_text("[plant]\nq_turbo = 1\n")
        with pytest.raises(ConfigError):
            _load_config_file(p)

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError):
            _load_config_file(tmp_path / "nope.ini")


class TestExitCodes:
    def test_no_output_dir_is_config_error(self, monkeypatch):
        monkeypatch.delenv("VRFT_LAB_OUTPUT_DIR", raising=False)
        assert main(["experiment", "--seeds", "1"]) == EXIT_CONFIG

    def test_validate_before_synthesize_is_io_error(self, tmp_path):
        args = ["validate", "--output-dir", str(tmp_path), "--scenario", "A",
                "--n", "100", "--seeds", "1"]
        assert main(args) == EXIT_IO

    def test_eps_flags_must_come_together(self, tmp_path):
        args = ["attack", "--output-dir", str(tmp_path), "--eps-u", "0.1"]
        assert main(args) == EXIT_CONFIG

    def test_bad_subcommand_is_config_error(self):
        assert main(["frobnicate"]) == EXIT_CONFIG


class TestEndToEnd:
    def test_full_pipeline_via_cli(self, tmp_path, capsys):
        base = ["--output-dir", str(tmp_path / "out"), "--scenario", "A",
                "--n", "100", "--seeds", "2", "--seed", "5"]
        cfg_file = tmp_path / "study.ini"
        cfg_file.write_text("[study]\nweeks = 1\n[attack]\neps_grid = 0.05:0.1\n")
        base = ["--config", str(cfg_file)] + base
        for cmd in ("experiment", "synthesize", "validate", "attack", "report"):
            code = main([cmd] + base)
            out = capsys.readouterr()
            assert code == EXIT_OK, f"{cmd} failed: {out.err}"
        out_dir = tmp_path / "out"
        assert (out_dir / "report" / "report.md").exists()
        assert (out_dir / "report" / "figures" / "controller_scatter.png").exists()

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("VRFT_LAB_OUTPUT_DIR", str(tmp_path / "env_out"))
        code = main(["experiment", "--scenario", "A", "--n", "100",
                     "--seeds", "1"])
        assert code == EXIT_OK
        assert any((tmp_path / "env_out").rglob("seed000.csv"))
