"""
Tests for the Experiment Orchestrator

Commands end to end on the small pipe configuration.
"""

import json

import pandas as pd
import pytest

from helpers.config_loader import run_config_from_dict
from hub.errors import CompatibilityError, ConfigurationError
import hub.orchestrator
from hub.orchestrator import (
    ExperimentOrchestrator,
    build_problem,
    offline_settings,
    pe_tag,
    uniform_pe,
)
from numerics.fem_core import InnerProductKind
from numerics.geometry_mesh import InterfaceId


@pytest.fixture
def small_config(small_config_dict):
    return run_config_from_dict(small_config_dict)


@pytest.fixture
def orchestrator(small_config, tmp_path):
    return ExperimentOrchestrator(small_config, tmp_path / "out")


class TestHelpers:
    """Grid and naming helpers"""

    def test_uniform_pe(self):
        assert uniform_pe(5.0, 14.0, 4) == pytest.approx([5.0, 8.0, 11.0, 14.0])
        assert uniform_pe(5.0, 14.0, 1) == [9.5]
        with pytest.raises(ConfigurationError):
            uniform_pe(5.0, 14.0, 0)

    def test_pe_tag(self):
        assert pe_tag(5.09091) == "5p09091"
        assert pe_tag(12.0) == "12"

    def test_build_problem(self, small_config, orchestrator):
        problem = build_problem(small_config, orchestrator.meshes, 2)
        assert problem.pe == 2.0
        assert problem.inlet.width == 1.0
        assert problem.fingerprint()['diffusion'] == 1.0

    def test_offline_settings(self, small_config):
        settings = offline_settings(small_config, InnerProductKind.L2D, enrichment=False)
        assert settings.d_train == [1.0, 2.0, 3.0]
        assert settings.kind is InnerProductKind.L2D
        assert not settings.enrichment
        assert settings.grid_counts[InterfaceId.GAMMA_2OUT] == [2, 1]
        assert settings.n_hidden == 4


class TestVerify1D:
    """Rate table command"""

    def test_rate_table(self, orchestrator):
        report = orchestrator.verify1d()
        assert report.command == "verify1d"
        assert len(report.rows) == 2
        assert report.exit_code == 0
        frame = pd.read_csv(report.files[0])
        assert list(frame.columns) == ["Pe", "delta", "rho", "log_rho_over_2delta", "rel_dev", "diverged"]
        assert (frame['rel_dev'] <= 0.10).all()

    def test_budget_violation_sets_exit_code(self, small_config_dict, tmp_path):
        small_config_dict['oned']['max_rel_dev'] = 1e-12
        orch = ExperimentOrchestrator(run_config_from_dict(small_config_dict), tmp_path)
        report = orch.verify1d()
        assert report.exit_code == 1
        assert report.warnings


class TestOfflineOnline:
    """Offline artifact and online stage"""

    def test_offline_writes_artifact(self, orchestrator, tmp_path):
        report, result = orchestrator.offline(tmp_path / "rom.json")
        assert (tmp_path / "rom.json").exists()
        assert not report.missing_files()
        assert {row['interface'] for row in report.rows} == {'2in', '1out', '3in', '2out'}
        manifest = json.loads((orchestrator.out_dir / "offline_report.json").read_text())
        assert manifest['config_hash'] == orchestrator.config_hash
        assert result.summary['snapshot_rows'] > 0

    def test_online_with_artifact(self, orchestrator, tmp_path):
        orchestrator.offline(tmp_path / "rom.json")
        report = orchestrator.online(tmp_path / "rom.json")
        assert [row['Pe'] for row in report.rows] == [1.5, 2.5]
        assert report.summary['omega2_solves'] == 0
        assert not report.missing_files()
        summary = pd.read_csv(orchestrator.out_dir / "summary.csv")
        assert len(summary) == 2
        assert (orchestrator.out_dir / "iterations_pe1p5.csv").exists()

    def test_online_with_oracle(self, orchestrator):
        report = orchestrator.online(None, oracle=True)
        assert report.exit_code == 0
        assert report.summary['omega2_solves'] > 0
        assert all(row['relL2_omega1'] < 1e-6 for row in report.rows)

    def test_online_needs_artifact(self, orchestrator):
        with pytest.raises(ConfigurationError):
            orchestrator.online(None)

    def test_online_rejects_other_geometry(self, orchestrator, small_config_dict, tmp_path):
        orchestrator.offline(tmp_path / "rom.json")
        small_config_dict['geometry']['lattice'] = {'nx1': 24, 'nx2': 32, 'nx3': 24, 'ny': 8}
        other = ExperimentOrchestrator(run_config_from_dict(small_config_dict), tmp_path / "other")
        with pytest.raises(CompatibilityError):
            other.online(tmp_path / "rom.json")

    def test_rom_cache(self, orchestrator, mocker):
        """One training per (config, product, enrichment)"""
        spy = mocker.spy(hub.orchestrator, "run_offline")
        first = orchestrator.rom_for()
        assert orchestrator.rom_for() is first
        assert spy.call_count == 1
        assert orchestrator.rom_for(enrichment=False) is not first
        assert spy.call_count == 2
