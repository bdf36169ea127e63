"""Unit tests for configuration management."""

import pytest
import os
from unittest.mock import patch


class TestSettings:
    """Tests for Settings configuration."""

    def test_default_values(self):
        """Test that default values are set correctly."""
        from app.config import Settings
        from src.core.points import GroupMode

        with patch.dict(os.environ, {}, clear=True):
            settings = Settings(_env_file=None)

            assert settings.log_level == "INFO"
            assert settings.output_dir == "results"
            assert settings.default_seed == 0
            assert settings.default_mode == GroupMode.HEISENBERG
            assert settings.default_n == 1
            assert settings.threads >= 1
            assert settings.run_integration_tests is False

    def test_custom_values(self):
        """Test that custom values can be set via environment variables."""
        from app.config import Settings
        from src.core.points import GroupMode

        env_vars = {
            "LOG_LEVEL": "debug",
            "HEISENBERG_THREADS": "3",
            "OUTPUT_DIR": "/tmp/reports",
            "DEFAULT_SEED": "17",
            "DEFAULT_MODE": "abelian",
            "DEFAULT_N": "2",
            "RUN_INTEGRATION_TESTS": "true"
        }

        with patch.dict(os.environ, env_vars, clear=True):
            settings = Settings(_env_file=None)

            assert settings.log_level == "DEBUG"
            assert settings.threads == 3
            assert settings.output_dir == "/tmp/reports"
            assert settings.default_seed == 17
            assert settings.default_mode == GroupMode.ABELIAN
            assert settings.default_n == 2
            assert settings.run_integration_tests is True

    def test_invalid_log_level(self):
        """Test that unknown log levels are rejected."""
        from app.config import Settings
        from pydantic import ValidationError

        with patch.dict(os.environ, {"LOG_LEVEL": "LOUD"}, clear=True):
            with pytest.raises(ValidationError, match="Unsupported log level"):
                Settings(_env_file=None)

    def test_threads_must_be_positive(self):
        """Test that zero worker threads are rejected."""
        from app.config import Settings
        from pydantic import ValidationError

        with patch.dict(os.environ, {"HEISENBERG_THREADS": "0"}, clear=True):
            with pytest.raises(ValidationError):
                Settings(_env_file=None)

    def test_quadrature_mapping(self):
        """Test that quadrature settings are carried into QuadratureConfig."""
        from app.config import Settings

        with patch.dict(os.environ, {"QUAD_REL_TOL": "1e-8", "QUAD_LIMIT": "50"}, clear=True):
            cfg = Settings(_env_file=None).quadrature()

            assert cfg.rel_tol == 1e-8
            assert cfg.node_budget == 50
            assert cfg.max_attempts == 3

    def test_boolean_values(self):
        """Test that boolean values are parsed correctly."""
        from app.config import Settings

        for value, expected in [("true", True), ("1", True), ("FALSE", False), ("0", False)]:
            with patch.dict(os.environ, {"RUN_INTEGRATION_TESTS": value}, clear=True):
                settings = Settings(_env_file=None)
                assert settings.run_integration_tests is expected, \
                    f"Failed for value: {value}"

    def test_settings_model_config(self):
        """Test that Settings has correct model configuration."""
        from app.config import Settings

        config = Settings.model_config
        assert config.get('case_sensitive') is False
        assert config.get('extra') == 'ignore'


class TestExperimentConfig:
    """Tests for ExperimentConfig."""

    def test_label_normalised(self):
        """Test that field labels are upper-cased."""
        from app.config import ExperimentConfig

        assert ExperimentConfig(j=" y1 ").j == "Y1"

    def test_from_settings(self):
        """Test that settings defaults seed the config."""
        from app.config import ExperimentConfig, Settings

        with patch.dict(os.environ, {"DEFAULT_SEED": "5", "DEFAULT_N": "2"}, clear=True):
            config = ExperimentConfig.from_settings(Settings(_env_file=None))

        assert config.seed == 5
        assert config.n == 2
        assert config.grid.n == 2
        assert config.grid.dim == 5

    def test_merged_skips_none(self):
        """Test that None overrides leave values untouched."""
        from app.config import ExperimentConfig

        config = ExperimentConfig(seed=3).merged({"seed": None, "j": "y1"})

        assert config.seed == 3
        assert config.j == "Y1"

    def test_merged_rebuilds_grid(self):
        """Test that changing the group without a grid rebuilds the grid."""
        from app.config import ExperimentConfig
        from src.core.points import GroupMode

        config = ExperimentConfig().merged({"mode": "abelian", "n": 3})

        assert config.mode == GroupMode.ABELIAN
        assert config.grid.mode == GroupMode.ABELIAN
        assert config.grid.dim == 3

    def test_hash_ignores_output_dir(self):
        """Test that moving the output directory keeps the hash."""
        from app.config import ExperimentConfig

        base = ExperimentConfig()

        assert base.merged({"output_dir": "/elsewhere"}).config_hash == base.config_hash
        assert base.merged({"seed": 1}).config_hash != base.config_hash

    def test_dump_and_load(self, tmp_path):
        """Test that a dumped config loads back equal."""
        from app.config import ExperimentConfig

        config = ExperimentConfig(j="X1", seed=9)

        path = config.dump(tmp_path / "cfg" / "experiment.json")

        assert ExperimentConfig.load(path) == config
        assert ExperimentConfig.load(path).config_hash == config.config_hash

    def test_vector_field(self):
        """Test that the label parses against the group."""
        from app.config import ExperimentConfig

        field = ExperimentConfig(n=2, j="Y2").vector_field()

        assert field.label == "Y2"
        assert not field.is_x_type

    def test_invalid_dimension(self):
        """Test that n = 0 is rejected."""
        from app.config import ExperimentConfig
        from pydantic import ValidationError

        with pytest.raises(ValidationError):
            ExperimentConfig(n=0)
