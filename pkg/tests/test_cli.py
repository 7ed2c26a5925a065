"""
Tests for the romschwarz command line
"""

import json

import pytest
import yaml

from hub.cli import EXIT_BUDGET, EXIT_INCOMPATIBLE, EXIT_OK, EXIT_USAGE, build_parser, main
from hub.orchestrator import ExperimentReport


@pytest.fixture
def config_path(tmp_path, small_config_dict):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(small_config_dict))
    return str(path)


class TestParser:
    def test_defaults(self):
        args = build_parser().parse_args(["verify1d"])
        assert args.out == "out"
        assert args.rom is None
        assert not args.oracle

    def test_unknown_command(self):
        assert main(["train"]) == EXIT_USAGE

    def test_unknown_study(self, config_path):
        assert main(["sweep", "--config", config_path, "--study", "nope"]) == EXIT_USAGE

    def test_help(self):
        assert main(["--help"]) == EXIT_OK


class TestCommands:
    """Exit codes of the four commands"""

    def test_verify1d(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["verify1d", "--config", config_path, "--out", str(out)]) == EXIT_OK
        assert (out / "table1.csv").exists()

    def test_output_dir_from_environment(self, config_path, tmp_path, monkeypatch):
        out = tmp_path / "env-out"
        monkeypatch.setenv("ROMSCHWARZ_OUT", str(out))
        assert main(["verify1d", "--config", config_path, "--out", str(tmp_path / "ignored")]) == EXIT_OK
        assert (out / "table1.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_missing_config(self, tmp_path):
        assert main(["verify1d", "--config", str(tmp_path / "absent.yaml")]) == EXIT_USAGE

    def test_invalid_config(self, tmp_path, small_config_dict):
        small_config_dict['geometry']['cuts'] = [1.0, 2.0]
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump(small_config_dict))
        assert main(["verify1d", "--config", str(path)]) == EXIT_USAGE

    def test_sweep_needs_study(self, config_path, tmp_path):
        assert main(["sweep", "--config", config_path, "--out", str(tmp_path)]) == EXIT_USAGE

    def test_online_needs_rom(self, config_path, tmp_path):
        assert main(["online", "--config", config_path, "--out", str(tmp_path)]) == EXIT_USAGE

    def test_online_with_garbage_rom(self, config_path, tmp_path):
        rom = tmp_path / "rom.json"
        rom.write_text("{broken")
        assert main(["online", "--config", config_path, "--rom", str(rom), "--out", str(tmp_path)]) \
            == EXIT_INCOMPATIBLE

    def test_online_with_future_rom(self, config_path, tmp_path):
        rom = tmp_path / "rom.json"
        rom.write_text(json.dumps({'version': 2}))
        assert main(["online", "--config", config_path, "--rom", str(rom), "--out", str(tmp_path)]) \
            == EXIT_INCOMPATIBLE

    def test_online_with_oracle(self, config_path, tmp_path):
        out = tmp_path / "out"
        assert main(["online", "--config", config_path, "--oracle", "--out", str(out)]) == EXIT_OK
        assert (out / "summary.csv").exists()

    def test_offline_then_online(self, config_path, tmp_path):
        out = tmp_path / "out"
        rom = tmp_path / "rom.json"
        assert main(["offline", "--config", config_path, "--rom", str(rom), "--out", str(out),
                     "--seed", "3"]) == EXIT_OK
        assert json.loads(rom.read_text())['network']['seed'] == 3
        code = main(["online", "--config", config_path, "--rom", str(rom), "--out", str(out), "--seed", "3"])
        assert code in (0, 1)
        assert (out / "online_report.json").exists()

    def test_sweep_dispatches_study(self, config_path, tmp_path, mocker):
        report = ExperimentReport(run_id="sweep-overlap-x", command="sweep-overlap", config_hash="x")
        run_study = mocker.patch("hub.cli.run_study", return_value=report)
        assert main(["sweep", "--config", config_path, "--study", "overlap", "--out", str(tmp_path)]) == EXIT_OK
        run_study.assert_called_once()
        assert run_study.call_args.args[1] == "overlap"

    def test_listed_file_missing(self, config_path, tmp_path, mocker):
        report = ExperimentReport(run_id="sweep-ablation-x", command="sweep-ablation", config_hash="x",
                                  files=[str(tmp_path / "never-written.csv")])
        mocker.patch("hub.cli.run_study", return_value=report)
        assert main(["sweep", "--config", config_path, "--study", "ablation", "--out", str(tmp_path)]) \
            == EXIT_BUDGET
