"""Tests for the manufactured and configured problems."""

import logging

import numpy as np
import pytest

from fracdiff_cldg.config.config_file import ConfigError
from fracdiff_cldg.frac_kernels import rl_derivative_by_quadrature
from fracdiff_cldg.problems import (
    BRIDGE,
    ManufacturedProblem,
    bridge_frac_deriv,
    bridge_profile,
    example1,
    example2,
    manufactured_residual,
    problem_from_config,
    riesz_diffusivity,
    spot_check,
)
from fracdiff_cldg.solver import ProblemSpec


class TestBridgeProfile:
    """Tests for x^3 (1-x)^3 and its fractional derivatives."""

    def test_profile_values(self) -> None:
        """Test the profile at a few points."""
        np.testing.assert_allclose(bridge_profile([0.0, 0.5, 1.0]), [0.0, 1.0 / 64.0, 0.0])

    @pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
    def test_left_derivative_matches_quadrature(self, alpha: float) -> None:
        """Test the power-rule derivative against the quadrature reference."""
        derivatives = [BRIDGE, BRIDGE.deriv(1), BRIDGE.deriv(2)]
        for x in (0.2, 0.55, 0.9):
            reference = rl_derivative_by_quadrature(derivatives, alpha, x)
            expected = pytest.approx(reference, rel=1e-9, abs=1e-12)
            assert bridge_frac_deriv(alpha, "left", x) == expected

    def test_right_is_mirrored_left(self) -> None:
        """Test that the right derivative at x equals the left one at 1 - x."""
        xs = np.array([0.1, 0.35, 0.8])
        np.testing.assert_allclose(
            bridge_frac_deriv(1.4, "right", xs), bridge_frac_deriv(1.4, "left", 1.0 - xs)
        )

    def test_rejects_points_outside(self) -> None:
        """Test the domain check."""
        with pytest.raises(ValueError):
            bridge_frac_deriv(1.5, "left", 1.2)

    def test_rejects_order_outside(self) -> None:
        """Test the order check."""
        with pytest.raises(ValueError):
            bridge_frac_deriv(2.5, "left", 0.5)


class TestExamples:
    """Tests for the two manufactured examples."""

    def test_riesz_diffusivity(self) -> None:
        """Test -1 / (2 cos(alpha pi / 2)) at alpha = 1.5."""
        assert riesz_diffusivity(1.5) == pytest.approx(np.sqrt(0.5))

    def test_example1_residual(self) -> None:
        """Test that the source of example 1 matches its exact solution."""
        problem = example1(1.5)
        rng = np.random.default_rng(0)
        points = rng.uniform(0.05, 0.95, 10)
        times = rng.uniform(0.0, 0.1, 10)
        assert manufactured_residual(problem, points, times) < 1e-8

    def test_example2_residual(self) -> None:
        """Test that the source of example 2 matches its exact solution."""
        problem = example2(1.3, 1.8)
        rng = np.random.default_rng(1)
        points = rng.uniform(0.05, 0.95, (10, 2))
        times = rng.uniform(0.0, 0.1, 10)
        assert manufactured_residual(problem, points, times) < 1e-6

    def test_example1_initial_matches_exact(self) -> None:
        """Test that g equals the exact solution at t = 0."""
        problem = example1(1.5)
        xs = np.linspace(0.0, 1.0, 7)
        assert problem.exact is not None
        np.testing.assert_allclose(problem.initial(xs), problem.exact(xs, 0.0))

    def test_example2_defaults_beta_to_alpha(self) -> None:
        """Test beta = alpha when omitted."""
        problem = example2(1.5)
        assert problem.beta == 1.5
        assert problem.diffusivity[0] == pytest.approx(problem.diffusivity[1])

    def test_wrong_source_has_residual(self) -> None:
        """Test that the residual notices a dropped source."""
        problem = example1(1.5)
        broken = ManufacturedProblem(
            1, 1.5, 1.5, (1.0,), None, problem.initial, 0.1, "broken", problem.exact,
            problem.separable,
        )
        assert manufactured_residual(broken, [0.5], [0.0]) > 1e-2


class TestProblemFromConfig:
    """Tests for problem_from_config and custom problems."""

    def test_example_dispatch(self) -> None:
        """Test that the built-in examples are selected by name."""
        problem = problem_from_config({"problem": "example2", "alpha": 1.5, "beta": 1.7})
        assert problem.name == "example2"
        assert problem.dimension == 2
        assert problem.beta == 1.7

    def test_missing_alpha(self) -> None:
        """Test that alpha is required."""
        with pytest.raises(ConfigError):
            problem_from_config({"problem": "example1"})

    def test_unknown_problem(self) -> None:
        """Test that an unknown name is a config error."""
        with pytest.raises(ConfigError):
            problem_from_config({"problem": "example9", "alpha": 1.5})

    def test_alpha_out_of_range(self) -> None:
        """Test that alpha outside (1, 2) is a config error."""
        with pytest.raises(ConfigError):
            problem_from_config({"problem": "example1", "alpha": 2.5})

    def test_custom_without_exact(self) -> None:
        """Test a custom problem with formulas and no exact solution."""
        problem = problem_from_config(
            {"problem": "custom", "alpha": 1.6, "d": 0.5, "g": "sin(pi*x)", "f": "x*t", "T": 0.2}
        )
        assert type(problem) is ProblemSpec
        assert problem.diffusivity == (0.5,)
        assert problem.t_final == 0.2
        assert problem.initial(0.5) == pytest.approx(1.0)
        assert problem.source is not None
        assert problem.source(0.5, 2.0) == pytest.approx(1.0)

    def test_custom_2d_defaults(self) -> None:
        """Test 2D custom defaults: beta = alpha, unit diffusivities, zero initial data."""
        problem = problem_from_config({"problem": "custom", "dimension": 2, "alpha": 1.4})
        assert problem.beta == 1.4
        assert problem.diffusivity == (1.0, 1.0)
        assert problem.source is None
        np.testing.assert_allclose(problem.initial(np.array([0.2, 0.4]), 0.3), 0.0)

    def test_custom_unknown_function(self) -> None:
        """Test that an unknown function in a formula is a config error."""
        with pytest.raises(ConfigError):
            problem_from_config({"problem": "custom", "alpha": 1.5, "g": "foo(x)"})

    def test_custom_negative_diffusivity(self) -> None:
        """Test that invalid problem values become config errors."""
        with pytest.raises(ConfigError):
            problem_from_config({"problem": "custom", "alpha": 1.5, "d": -1.0})

    def test_custom_table_in_2d_rejected(self) -> None:
        """Test that tabulated data is 1D only."""
        with pytest.raises(ConfigError):
            problem_from_config(
                {
                    "problem": "custom",
                    "dimension": 2,
                    "alpha": 1.5,
                    "g": {"x": [0.0, 1.0], "values": [0.0, 1.0]},
                }
            )

    def test_spot_check_warns_on_mismatch(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test that a source inconsistent with the exact solution logs a warning."""
        with caplog.at_level(logging.WARNING, logger="fracdiff_cldg.problems"):
            problem = problem_from_config(
                {
                    "problem": "custom",
                    "alpha": 1.5,
                    "g": "x**2*(1-x)**2",
                    "exact": "exp(t)*x**2*(1-x)**2",
                    "f": "0",
                }
            )
        assert isinstance(problem, ManufacturedProblem)
        assert "does not match" in caplog.text

    def test_spot_check_passes_for_example(self, caplog: pytest.LogCaptureFixture) -> None:
        """Test that a consistent problem logs no warning."""
        with caplog.at_level(logging.WARNING, logger="fracdiff_cldg.problems"):
            residual = spot_check(example1(1.7))
        assert residual < 1e-8
        assert "does not match" not in caplog.text
