"""Tests for Riemann-Liouville kernels and reference oracles."""

import math
from collections.abc import Callable

import numpy as np
import pytest

from fracdiff_cldg.frac_kernels import (
    CellPolynomial,
    FractionalExponent,
    eval_power_term,
    gauss_jacobi_rule,
    gl_fractional_derivative,
    grunwald_weights,
    left_frac_deriv_cellpoly,
    left_frac_integral,
    power_rule_factor,
    right_frac_deriv_cellpoly,
    right_frac_integral,
    rl_derivative_by_quadrature,
    rl_power_rule,
    rl_power_rule_right,
)


def _monomial_derivatives(m: int) -> list[Callable[[np.ndarray], np.ndarray]]:
    if m == 0:
        return [lambda t: np.ones_like(t), lambda t: np.zeros_like(t)]
    return [lambda t: t**m, lambda t: m * t ** (m - 1)]


class TestFractionalExponent:
    """Tests for order validation."""

    def test_scheme_half_order(self) -> None:
        """Test that alpha = 1.5 gives the Gram exponent 0.25."""
        half = FractionalExponent.problem_order(1.5).scheme_half_order()
        assert half.value == pytest.approx(0.25)

    def test_rejects_half_order_out_of_range(self) -> None:
        """Test that Gram exponents outside (0, 1/2) are rejected."""
        with pytest.raises(ValueError):
            FractionalExponent.half_order(0.6)

    def test_rejects_problem_order_at_two(self) -> None:
        """Test that alpha = 2 falls outside the guard band."""
        with pytest.raises(ValueError):
            FractionalExponent.problem_order(2.0)


class TestPowerRule:
    """Tests for the closed-form power rule."""

    def test_factor_matches_gamma_ratio(self) -> None:
        """Test Gamma(m+1)/Gamma(m+1-s) against math.gamma."""
        assert power_rule_factor(3.0, 0.4) == pytest.approx(math.gamma(4.0) / math.gamma(3.6))

    def test_factor_large_power_is_finite(self) -> None:
        """Test that log-gamma keeps large powers finite."""
        value = power_rule_factor(400.0, 0.3)
        assert math.isfinite(value)
        assert value == pytest.approx(400.0**0.3, rel=1e-2)

    def test_left_rule_value(self) -> None:
        """Test D^{1/2} x at x = 1/4."""
        expected = 0.25**0.5 / math.gamma(1.5)
        assert rl_power_rule(0.5, 1.0, 0.0, 0.25) == pytest.approx(expected)

    def test_right_rule_is_mirror(self) -> None:
        """Test that the right rule at x equals the left rule at 1 - x."""
        x = np.array([0.1, 0.4, 0.9])
        right = rl_power_rule_right(0.3, 2.0, 1.0, x)
        left = rl_power_rule(0.3, 2.0, 0.0, 1.0 - x)
        np.testing.assert_allclose(right, left)

    def test_matches_quadrature_on_random_inputs(self) -> None:
        """Test the power rule against Gauss-Jacobi quadrature at 50 random (s, m, x)."""
        rng = np.random.default_rng(7)
        for _ in range(50):
            s = float(rng.uniform(0.05, 0.95))
            m = int(rng.integers(0, 7))
            x = float(rng.uniform(0.05, 1.0))
            reference = rl_derivative_by_quadrature(_monomial_derivatives(m), s, x)
            assert rl_power_rule(s, float(m), 0.0, x) == pytest.approx(reference, rel=1e-10)

    def test_left_rule_rejects_x_below_a(self) -> None:
        """Test the domain error for x < a."""
        with pytest.raises(ValueError):
            rl_power_rule(0.5, 1.0, 0.5, 0.2)

    def test_right_rule_rejects_x_above_b(self) -> None:
        """Test the domain error for x > b."""
        with pytest.raises(ValueError):
            rl_power_rule_right(0.5, 1.0, 0.5, 0.7)


class TestEvalPowerTerm:
    """Tests for eval_power_term."""

    def test_zero_outside_support(self) -> None:
        """Test that non-positive distances give zero."""
        values = eval_power_term(np.array([1.0, 2.0]), np.array([-1.0, 0.0, 4.0]), 0.5)
        np.testing.assert_allclose(values, [0.0, 0.0, 4.5])


class TestCellPolynomial:
    """Tests for CellPolynomial."""

    def test_projection_reproduces_polynomial(self) -> None:
        """Test that a quadratic is reproduced by its degree-2 projection."""
        p = CellPolynomial.from_function(lambda x: x**2, 0.2, 0.6, 2)
        assert p.evaluate_extension(0.9) == pytest.approx(0.81)
        assert p.evaluate(0.4) == pytest.approx(0.16)

    def test_zero_outside_cell(self) -> None:
        """Test that evaluate is zero off the support."""
        p = CellPolynomial.from_function(lambda x: x**2, 0.2, 0.6, 2)
        assert p.evaluate(0.9) == 0.0

    def test_power_coefficients_about_lower(self) -> None:
        """Test the expansion of x^2 in powers of (x - 0.2)."""
        p = CellPolynomial.from_function(lambda x: x**2, 0.2, 0.6, 2)
        np.testing.assert_allclose(p.power_coefficients("lower"), [0.04, 0.4, 1.0], atol=1e-12)

    def test_power_coefficients_reflected_about_upper(self) -> None:
        """Test the expansion of x^2 in powers of (0.6 - x)."""
        p = CellPolynomial.from_function(lambda x: x**2, 0.2, 0.6, 2)
        np.testing.assert_allclose(
            p.power_coefficients("upper", reflected=True), [0.36, -1.2, 1.0], atol=1e-12
        )

    def test_mirror(self) -> None:
        """Test that the mirrored polynomial takes p's values at 1 - x."""
        p = CellPolynomial.from_function(lambda x: x**2 + x, 0.2, 0.6, 2)
        x = np.array([0.45, 0.6, 0.75])
        np.testing.assert_allclose(p.mirror().evaluate(x), p.evaluate(1.0 - x))

    def test_rejects_empty_support(self) -> None:
        """Test that a zero-width cell is rejected."""
        with pytest.raises(ValueError):
            CellPolynomial(0.5, 0.5, np.array([1.0]))


class TestCellDerivatives:
    """Tests for fractional derivatives of zero-extended cell polynomials."""

    def test_zero_left_of_cell(self) -> None:
        """Test that the left derivative vanishes before the cell."""
        p = CellPolynomial.from_power_coefficients([1.0, 2.0], 0.4, 0.7)
        assert left_frac_deriv_cellpoly(p, 0.3, 0.2) == 0.0

    def test_inside_cell_is_power_rule(self) -> None:
        """Test D^s x on its own cell against the power rule."""
        p = CellPolynomial.from_power_coefficients([0.0, 1.0], 0.0, 0.5)
        x = np.array([0.1, 0.3, 0.5])
        np.testing.assert_allclose(
            left_frac_deriv_cellpoly(p, 0.5, x), rl_power_rule(0.5, 1.0, 0.0, x), rtol=1e-12
        )

    def test_beyond_cell_subtracts_upper_term(self) -> None:
        """Test the tail of D^s (x on [0, 1/2]) at x = 3/4."""
        p = CellPolynomial.from_power_coefficients([0.0, 1.0], 0.0, 0.5)
        x = 0.75
        near = x**0.5 / math.gamma(1.5)
        far = 0.5 * (x - 0.5) ** -0.5 / math.gamma(0.5) + (x - 0.5) ** 0.5 / math.gamma(1.5)
        assert left_frac_deriv_cellpoly(p, 0.5, x) == pytest.approx(near - far, rel=1e-12)

    @pytest.mark.parametrize("s", [0.05, 0.25, 0.45])
    @pytest.mark.parametrize("m", range(7))
    def test_full_domain_cell_is_power_rule(self, s: float, m: int) -> None:
        """Test x^m on the single cell [0, 1] against the power rule."""
        power = np.zeros(m + 1)
        power[m] = 1.0
        p = CellPolynomial.from_power_coefficients(power, 0.0, 1.0)
        x = np.linspace(0.05, 1.0, 20)
        expected = rl_power_rule(s, float(m), 0.0, x)
        np.testing.assert_allclose(
            left_frac_deriv_cellpoly(p, s, x),
            expected,
            rtol=1e-10,
            atol=1e-12 * np.max(np.abs(expected)),
        )

    def test_mirror_identity_on_random_inputs(self) -> None:
        """Test D_R^s p(x) = D_L^s (mirror p)(1 - x) for random cells, orders and points."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            lower = float(rng.uniform(0.0, 0.8))
            upper = lower + (1.0 - lower) * float(rng.uniform(0.1, 1.0))
            p = CellPolynomial(lower, upper, rng.standard_normal(int(rng.integers(1, 5))))
            s = float(rng.uniform(0.05, 0.95))
            x = rng.uniform(0.0, 1.0, 12)
            x = x[np.min(np.abs(x[:, None] - np.array([lower, upper])), axis=1) > 1e-3]
            np.testing.assert_allclose(
                right_frac_deriv_cellpoly(p, s, x),
                left_frac_deriv_cellpoly(p.mirror(), s, 1.0 - x),
                rtol=1e-10,
                atol=1e-12,
            )

    def test_right_derivative_is_mirrored_left(self) -> None:
        """Test D_R^s p(x) = D_L^s (mirror p)(1 - x)."""
        p = CellPolynomial.from_power_coefficients([0.3, -1.0, 2.0], 0.25, 0.5)
        x = np.array([0.05, 0.3, 0.45])
        np.testing.assert_allclose(
            right_frac_deriv_cellpoly(p, 0.35, x),
            left_frac_deriv_cellpoly(p.mirror(), 0.35, 1.0 - x),
            rtol=1e-10,
            atol=1e-12,
        )

    def test_rejects_points_outside_domain(self) -> None:
        """Test the domain error for x outside [0, 1]."""
        p = CellPolynomial.from_power_coefficients([1.0], 0.0, 0.5)
        with pytest.raises(ValueError):
            left_frac_deriv_cellpoly(p, 0.3, 1.2)

    def test_rejects_order_outside_unit_interval(self) -> None:
        """Test the domain error for s >= 1."""
        p = CellPolynomial.from_power_coefficients([1.0], 0.0, 0.5)
        with pytest.raises(ValueError):
            left_frac_deriv_cellpoly(p, 1.2, 0.3)


class TestGaussJacobi:
    """Tests for the Gauss-Jacobi rule on (0, 1)."""

    def test_exact_for_weighted_cubic(self) -> None:
        """Test that two nodes integrate t^{-0.3} t^3 exactly."""
        t, w = gauss_jacobi_rule(2, -0.3)
        assert np.dot(w, t**3) == pytest.approx(1.0 / 3.7, rel=1e-12)

    def test_weights_sum_to_weight_integral(self) -> None:
        """Test that the weights integrate t^e."""
        _, w = gauss_jacobi_rule(5, -0.6)
        assert np.sum(w) == pytest.approx(1.0 / 0.4)

    def test_rejects_positive_exponent(self) -> None:
        """Test that exponents outside (-1, 0) are rejected."""
        with pytest.raises(ValueError):
            gauss_jacobi_rule(3, 0.5)


class TestFractionalIntegral:
    """Tests for the quadrature-based fractional integrals."""

    def test_integral_of_constant(self) -> None:
        """Test I^s 1 = x^s / Gamma(s + 1)."""
        value = left_frac_integral(lambda t: np.ones_like(t), 0.4, 0.8)
        assert value == pytest.approx(0.8**0.4 / math.gamma(1.4), rel=1e-12)

    def test_derivative_inverts_integral(self) -> None:
        """Test that a Grunwald-Letnikov derivative of the quadrature integral recovers f."""
        s = 0.3

        def f(t: np.ndarray) -> np.ndarray:
            return t**2 + t

        grid = np.linspace(0.0, 1.0, 1001)
        integral = np.array([left_frac_integral(f, s, float(x)) for x in grid])
        recovered = gl_fractional_derivative(integral, s, grid[1] - grid[0])
        for index in (300, 600, 900):
            assert recovered[index] == pytest.approx(f(grid[index]), abs=2e-3)

    def test_right_integral_is_mirror(self) -> None:
        """Test the right integral of (1 - t) against the left one of t."""
        right = right_frac_integral(lambda t: 1.0 - t, 0.4, 0.3)
        left = left_frac_integral(lambda t: t, 0.4, 0.7)
        assert right == pytest.approx(left, rel=1e-12)


class TestDerivativeByQuadrature:
    """Tests for the reference Riemann-Liouville derivative."""

    def test_order_between_one_and_two(self) -> None:
        """Test D^{1.5} x^2 against the power rule."""
        derivatives = [lambda t: t**2, lambda t: 2.0 * t, lambda t: 2.0 * np.ones_like(t)]
        value = rl_derivative_by_quadrature(derivatives, 1.5, 0.5)
        assert value == pytest.approx(2.0 / math.gamma(1.5) * 0.5**0.5, rel=1e-12)

    def test_order_below_one_keeps_boundary_term(self) -> None:
        """Test D^{1/2} (1 + x), whose value at a contributes a singular term."""
        derivatives = [lambda t: 1.0 + t, lambda t: np.ones_like(t)]
        x = 0.4
        expected = x**-0.5 / math.gamma(0.5) + x**0.5 / math.gamma(1.5)
        assert rl_derivative_by_quadrature(derivatives, 0.5, x) == pytest.approx(expected)

    def test_right_side(self) -> None:
        """Test the right derivative of (1 - x)^2."""
        derivatives = [
            lambda t: (1.0 - t) ** 2,
            lambda t: -2.0 * (1.0 - t),
            lambda t: 2.0 * np.ones_like(t),
        ]
        value = rl_derivative_by_quadrature(derivatives, 1.5, 0.2, side="right")
        assert value == pytest.approx(2.0 / math.gamma(1.5) * 0.8**0.5, rel=1e-12)

    def test_needs_enough_derivatives(self) -> None:
        """Test that order 1.5 without f'' is rejected."""
        with pytest.raises(ValueError):
            rl_derivative_by_quadrature([lambda t: t, lambda t: np.ones_like(t)], 1.5, 0.5)

    def test_rejects_integer_order(self) -> None:
        """Test that integer orders are rejected."""
        with pytest.raises(ValueError):
            rl_derivative_by_quadrature([lambda t: t] * 3, 1.0, 0.5)


class TestGrunwaldLetnikov:
    """Tests for the Grunwald-Letnikov reference."""

    def test_weights(self) -> None:
        """Test the first weights for s = 1/2."""
        np.testing.assert_allclose(grunwald_weights(0.5, 3), [1.0, -0.5, -0.125])

    def test_converges_to_power_rule(self) -> None:
        """Test D^{1/2} x at x = 1/2 on a fine grid."""
        grid = np.linspace(0.0, 1.0, 2001)
        values = gl_fractional_derivative(grid, 0.5, grid[1] - grid[0])
        assert values[1000] == pytest.approx(rl_power_rule(0.5, 1.0, 0.0, 0.5), abs=5e-3)

    def test_first_order_against_cell_kernel(self) -> None:
        """Test first-order convergence to the analytic derivative of a cell polynomial."""
        p = CellPolynomial.from_power_coefficients([0.0, 0.0, 1.0], 0.25, 0.5)
        exact = left_frac_deriv_cellpoly(p, 0.25, 0.75)
        errors = []
        for cells in (200, 400, 800):
            grid = np.linspace(0.0, 1.0, cells + 1)
            values = gl_fractional_derivative(p.evaluate(grid), 0.25, 1.0 / cells)
            errors.append(abs(values[3 * cells // 4] - exact))
        assert errors[-1] < 1e-2
        for coarse, fine in zip(errors, errors[1:]):
            assert math.log2(coarse / fine) >= 0.8

    def test_right_side_is_mirror(self) -> None:
        """Test that the right sweep is the left sweep of the reversed samples."""
        samples = np.linspace(0.0, 1.0, 11) ** 2
        right = gl_fractional_derivative(samples, 0.4, 0.1, side="right")
        left = gl_fractional_derivative(samples[::-1], 0.4, 0.1)[::-1]
        np.testing.assert_allclose(right, left)

    def test_rejects_single_sample(self) -> None:
        """Test that one sample is not enough."""
        with pytest.raises(ValueError):
            gl_fractional_derivative([1.0], 0.5, 0.1)
