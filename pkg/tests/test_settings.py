"""Tests for Settings validation and source precedence."""

import os

import pytest

from fracdiff_cldg.config.config_file import ConfigError
from fracdiff_cldg.config.settings import Settings


class TestSettings:
    """Tests for Settings defaults and validation."""

    def test_defaults(self) -> None:
        """Test the defaults for example 1."""
        settings = Settings()
        assert settings.dimension == 1
        assert settings.beta == settings.alpha
        assert settings.cells == (8, 16, 32, 64)
        assert settings.tau_max_coeff == 0.1
        assert settings.tau_coeff == 0.1

    def test_example2_presets(self) -> None:
        """Test that example 2 implies 2D cells and step coefficients."""
        settings = Settings(problem="example2")
        assert settings.dimension == 2
        assert settings.cells == (4, 8, 12, 16)
        assert settings.tau_max_coeff == 0.02

    def test_k2_presets(self) -> None:
        """Test the 1D k = 2 presets."""
        settings = Settings(k=2)
        assert settings.cells == (4, 8, 16, 32)
        assert settings.tau_max_coeff == 0.005
        assert settings.tau_coeff == 0.01

    def test_full_meshes(self) -> None:
        """Test the full reference mesh lists and that explicit cells win."""
        assert Settings(full_meshes=True).cells == (8, 16, 32, 64, 128, 256)
        assert Settings(problem="example2", full_meshes=True).cells == (4, 8, 12, 16, 20)
        assert Settings(full_meshes=True, cells=(8, 16)).cells == (8, 16)

    def test_unpublished_pair_falls_back(self) -> None:
        """Test that 2D k = 2 uses the most restrictive 2D coefficients."""
        settings = Settings(problem="example2", k=2)
        assert settings.tau_max_coeff == 0.02

    def test_out_made_absolute(self) -> None:
        """Test that the output path is resolved."""
        assert Settings(out="table.csv").out == os.path.abspath("table.csv")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"problem": "example3"},
            {"problem": "custom"},
            {"problem": "example1", "dimension": 2},
            {"problem": "example2", "dimension": 1},
            {"alpha": 2.0},
            {"alpha": 1.5, "beta": 0.9},
            {"k": -1},
            {"cells": (8, 4)},
            {"cells": (1, 2)},
            {"t_final": 0.0},
            {"tau_coeff": 1.5},
            {"integrator": "rk4"},
            {"format": "xml"},
            {"workers": 0},
        ],
    )
    def test_rejects_invalid(self, kwargs: dict[str, object]) -> None:
        """Test that invalid settings raise ConfigError."""
        with pytest.raises(ConfigError):
            Settings(**kwargs)  # type: ignore[arg-type]


class TestFromSources:
    """Tests for Settings.from_sources."""

    def test_precedence(self) -> None:
        """Test file < environment < CLI."""
        settings = Settings.from_sources(
            {"alpha": 1.9, "k": None},
            env_values={"alpha": 1.7, "k": 2, "workers": 3},
            file_values={"alpha": 1.3, "k": 1, "workers": 2, "seed": 7},
        )
        assert settings.alpha == 1.9
        assert settings.k == 2
        assert settings.workers == 3
        assert settings.seed == 7

    def test_problem_keys_routed(self) -> None:
        """Test that problem keys land in problem_config."""
        settings = Settings.from_sources(
            {"problem": "custom", "dimension": 1, "alpha": 1.5},
            file_values={"g": "sin(pi*x)", "d": 0.5},
        )
        assert settings.problem_config == {"g": "sin(pi*x)", "d": 0.5}

    def test_validation_applies(self) -> None:
        """Test that merged values are validated."""
        with pytest.raises(ConfigError):
            Settings.from_sources({"alpha": 3.0})
