"""
Tests for the run configuration loader
"""

import pytest
import yaml

from helpers.config_loader import (
    DEFAULT_CONFIG,
    TABLE2_PE,
    ConfigurationLoader,
    dump_run_config,
    load_run_config,
    overlap_variant,
    run_config_from_dict,
)
from hub.errors import ConfigurationError
from numerics.fem_core import InnerProductKind
from numerics.geometry_mesh import InterfaceId
from numerics.schwarz import InitKind


@pytest.fixture
def config_file(tmp_path, small_config_dict):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(small_config_dict))
    return path


class TestLoading:
    """YAML loading and validation"""

    def test_default_config_loads(self):
        """The shipped configuration describes the full pipe"""
        config = load_run_config(DEFAULT_CONFIG)
        assert config.geometry.cuts == [7.0, 12.0, 26.0, 31.0]
        assert config.geometry.lattice.ny == 50
        assert config.parameters.inner_product is InnerProductKind.H1D
        assert config.online.init.kind is InitKind.SCALED_REFERENCE
        assert config.online.trial_pe == TABLE2_PE

    def test_small_config(self, config_file):
        config = load_run_config(config_file)
        assert config.parameters.d_train() == [1.0, 2.0, 3.0]
        assert config.parameters.d_tilde() == [1.0, 3.0]
        assert config.parameters.interface_grid_counts() == {
            InterfaceId.GAMMA_2IN: [2, 1], InterfaceId.GAMMA_2OUT: [2, 1]}
        assert config.inlet().width == 1.0

    def test_single_node_is_range_centre(self, small_config_dict):
        small_config_dict['parameters']['d_tilde_count'] = 1
        assert run_config_from_dict(small_config_dict).parameters.d_tilde() == [2.0]

    def test_env_substitution(self, tmp_path, monkeypatch):
        """${VAR:-default} takes the environment value when set"""
        path = tmp_path / "env.yaml"
        path.write_text("seed: ${RS_TEST_SEED:-7}\nworkers: ${RS_TEST_WORKERS:-1}\n")
        monkeypatch.setenv("RS_TEST_SEED", "11")
        monkeypatch.delenv("RS_TEST_WORKERS", raising=False)
        config = ConfigurationLoader().load_run_config(path)
        assert config.seed == 11
        assert config.workers == 1

    def test_overrides(self, config_file):
        config = load_run_config(config_file, {'seed': 5, 'network': {'n_hidden': 6}})
        assert config.seed == 5
        assert config.network.n_hidden == 6
        assert config.network.max_iter == 50

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / "absent.yaml")

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("geometry: [unclosed\n")
        with pytest.raises(ConfigurationError):
            load_run_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            load_run_config(path)


class TestValidation:
    """Field and geometry checks"""

    @pytest.mark.parametrize("block, key, value", [
        ('parameters', 'd_range', [3.0, 1.0]),
        ('parameters', 'grid_counts', {'2in': [0]}),
        ('parameters', 'grid_counts', {'1out': [2]}),
        ('parameters', 'sigma', 0.0),
        ('network', 'val_fraction', 1.0),
        ('online', 'eps_stop', -1.0),
    ])
    def test_invalid_values(self, small_config_dict, block, key, value):
        small_config_dict[block][key] = value
        with pytest.raises(ConfigurationError):
            run_config_from_dict(small_config_dict)

    def test_three_cuts(self, small_config_dict):
        small_config_dict['geometry']['cuts'] = [2.0, 3.0, 5.0]
        with pytest.raises(ConfigurationError):
            run_config_from_dict(small_config_dict)

    def test_unordered_cuts(self, small_config_dict):
        small_config_dict['geometry']['cuts'] = [3.0, 2.0, 5.0, 6.0]
        with pytest.raises(ConfigurationError):
            run_config_from_dict(small_config_dict)

    def test_oned_warmup_must_fit(self, small_config_dict):
        small_config_dict['oned'].update(max_sweeps=10, warmup=8)
        with pytest.raises(ConfigurationError):
            run_config_from_dict(small_config_dict)


class TestDerivedConfigs:
    """Hashes and variants"""

    def test_hash_is_stable(self, small_config_dict):
        a = run_config_from_dict(small_config_dict)
        b = run_config_from_dict(yaml.safe_load(dump_run_config(a)))
        assert a.config_hash() == b.config_hash()

    def test_hash_ignores_logging_and_workers(self, small_config_dict):
        base = run_config_from_dict(small_config_dict).config_hash()
        small_config_dict['workers'] = 4
        small_config_dict['logging'] = {'level': 'DEBUG'}
        assert run_config_from_dict(small_config_dict).config_hash() == base

    def test_hash_follows_semantics(self, small_config_dict):
        base = run_config_from_dict(small_config_dict).config_hash()
        small_config_dict['parameters']['sigma'] = 1e-4
        assert run_config_from_dict(small_config_dict).config_hash() != base

    def test_overlap_variant_keeps_cell_size(self, small_config_dict):
        config = run_config_from_dict(small_config_dict)
        wide = overlap_variant(config, (2.0, 3.5, 4.5, 6.0))
        assert wide.geometry.cuts == [2.0, 3.5, 4.5, 6.0]
        assert (wide.geometry.lattice.nx1, wide.geometry.lattice.nx2, wide.geometry.lattice.nx3) == (14, 16, 14)
        assert wide.geometry.pipe().overlap_12 == pytest.approx(1.5)
        assert wide.config_hash() != config.config_hash()
