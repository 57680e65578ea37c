import pytest

from thermopepo.config import DEFAULT_MU_GRID, DEFAULT_TEMPERATURES, RunConfig, load_run_config
from thermopepo.exceptions import ConfigError


class TestLoadRunConfig:
    def test_full_document(self, write_config):
        path = write_config("""
            # hard-core scan
            CONFIG_VERSION=1
            MODEL=hardcore
            J=1.5
            MU=-0.5
            BOND_DIM=3
            DELTA_BETA=0.001
            TEMPERATURES=0.5,1.0
            MU_GRID=-1:1:0.5
            OUTPUT=out/scan.csv
            WORKERS=2
        """)
        run_config = load_run_config(path)
        assert run_config.model == 'hardcore'
        assert run_config.model_params == {'J': 1.5, 'mu': -0.5}
        assert run_config.bond_dim == 3
        assert run_config.chi == 30
        assert run_config.temperatures == (0.5, 1.0)
        assert run_config.mu_grid == (-1.0, -0.5, 0.0, 0.5, 1.0)
        assert run_config.beta_max == pytest.approx(2.0)
        assert run_config.workers == 2

    def test_defaults(self, write_config):
        run_config = load_run_config(write_config("MODEL=ising\nCHECKPOINTS=0.1,0.4"))
        assert run_config.bond_dim == 2 and run_config.chi == 20
        assert run_config.beta_max == pytest.approx(0.4)
        assert run_config.temperatures is None and run_config.mu_grid is None

    def test_mu_grid_list(self, write_config):
        run_config = load_run_config(write_config("MODEL=softcore\nMU_GRID=0.5, 1.5,2"))
        assert run_config.mu_grid == (0.5, 1.5, 2.0)
        assert run_config.model_params['U'] == 100.0

    def test_unknown_key_reports_line(self, write_config):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(write_config("MODEL=ising\n\nBOND_DIMENSION=2"))
        assert excinfo.value.line == 3
        assert excinfo.value.field == 'BOND_DIMENSION'

    def test_line_without_equals(self, write_config):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(write_config("MODEL=ising\nBOND_DIM 2"))
        assert excinfo.value.line == 2

    def test_unparseable_value(self, write_config):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(write_config("MODEL=ising\nBOND_DIM=two"))
        assert excinfo.value.field == 'BOND_DIM'
        assert excinfo.value.line == 2

    def test_step_larger_than_range(self, write_config):
        with pytest.raises(ConfigError, match='DELTA_BETA'):
            load_run_config(write_config("DELTA_BETA=0.5\nBETA_MAX=0.2"))

    def test_unsorted_checkpoints(self, write_config):
        with pytest.raises(ConfigError):
            load_run_config(write_config("CHECKPOINTS=0.4,0.2\nBETA_MAX=1"))

    def test_unsupported_version(self, write_config):
        with pytest.raises(ConfigError, match='version'):
            load_run_config(write_config("CONFIG_VERSION=2"))

    def test_unknown_model(self, write_config):
        with pytest.raises(ConfigError):
            load_run_config(write_config("MODEL=heisenberg"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match='not found'):
            load_run_config(tmp_path / 'missing.env')

    def test_exit_code(self):
        assert ConfigError('bad').exit_code == 1


class TestRunConfig:
    def test_with_mu(self):
        run_config = RunConfig(model='hardcore').with_mu(2.5)
        assert run_config.mu == 2.5 and run_config.model_params['mu'] == 2.5

    def test_validate_rejects_non_positive_workers(self):
        with pytest.raises(ConfigError):
            RunConfig(workers=0).validate()

    def test_default_grids(self):
        assert len(DEFAULT_MU_GRID) == 41
        assert DEFAULT_MU_GRID[0] == -5.0 and DEFAULT_MU_GRID[-1] == 5.0 and 0.0 in DEFAULT_MU_GRID
        assert DEFAULT_TEMPERATURES == (0.05, 0.5, 1.0, 1.5, 2.0)
