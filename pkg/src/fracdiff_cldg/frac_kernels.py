"""Riemann-Liouville kernels for cell-supported polynomials, plus reference oracles.

A polynomial p supported on a cell [a, b] and extended by zero has the left
derivative

    D^s p(x) = H(x-a) (x-a)^{-s} P_a(x-a) - H(x-b) (x-b)^{-s} P_b(x-b),

where P_a, P_b are the power expansions of the smooth extension of p about a
and b with every power m scaled by Gamma(m+1)/Gamma(m+1-s). The right
derivative is the mirror image. These "power terms" are shared by the point
kernels below and by the Gram assembly in ``assembly``.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial, legendre
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaln, gammasgn, roots_jacobi, roots_legendre

from fracdiff_cldg.config.constants import CONSTANTS

FloatArray = NDArray[np.float64]
Side = Literal["left", "right"]
Anchor = Literal["lower", "upper"]


@dataclass(frozen=True)
class FractionalExponent:
    """A fractional order, validated for the role it plays."""

    value: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value) or self.value <= 0:
            raise ValueError(f"fractional exponent must be positive and finite, got {self.value}")

    def __float__(self) -> float:
        return float(self.value)

    @classmethod
    def half_order(cls, value: float) -> "FractionalExponent":
        """Exponent used in Gram assembly; must lie strictly in (0, 1/2)."""
        if not 0.0 < value < 0.5:
            raise ValueError(f"Gram exponent must lie in (0, 1/2), got {value}")
        return cls(value)

    @classmethod
    def problem_order(cls, value: float) -> "FractionalExponent":
        """Whole order of the diffusion operator; must lie in (1, 2) with a guard band."""
        guard = CONSTANTS.ORDER_GUARD
        if not 1.0 + guard <= value <= 2.0 - guard:
            raise ValueError(f"problem order must lie in (1, 2), got {value}")
        return cls(value)

    def scheme_half_order(self) -> "FractionalExponent":
        """Return (2 - alpha) / 2 for a problem order alpha."""
        return FractionalExponent.half_order((2.0 - self.value) / 2.0)


def _order(s: "float | FractionalExponent") -> float:
    return float(s)


def _check_unit_order(s: float) -> None:
    if not 0.0 < s < 1.0:
        raise ValueError(f"order must lie in (0, 1), got {s}")


def power_rule_factor(m: "float | FloatArray", order: float) -> "float | FloatArray":
    """Gamma(m+1) / Gamma(m+1-order), via log-gamma.

    Negative orders give the fractional-integral factor. At poles of the
    denominator the factor is zero.
    """
    m = np.asarray(m, dtype=float)
    denom = m + 1.0 - order
    with np.errstate(over="ignore", invalid="ignore"):
        factor = gammasgn(denom) * np.exp(gammaln(m + 1.0) - gammaln(denom))
    factor = np.where(np.isfinite(factor), factor, 0.0)
    return float(factor) if factor.ndim == 0 else factor


def _as_output(values: FloatArray, like: ArrayLike) -> "float | FloatArray":
    return float(values) if np.ndim(like) == 0 else values


def rl_power_rule(
    s: "float | FractionalExponent", m: float, a: float, x: ArrayLike
) -> "float | FloatArray":
    """Left Riemann-Liouville derivative of (x-a)^m with lower limit a.

    Args:
        s: Order in (0, 1).
        m: Power, m >= 0 (non-integer powers are allowed).
        a: Lower limit.
        x: Evaluation point(s), x >= a.

    Returns:
        Gamma(m+1)/Gamma(m+1-s) * (x-a)^(m-s).
    """
    s = _order(s)
    _check_unit_order(s)
    if m < 0:
        raise ValueError(f"power must be non-negative, got {m}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < a):
        raise ValueError(f"power rule needs x >= a = {a}")
    with np.errstate(divide="ignore"):
        values = power_rule_factor(m, s) * np.power(xs - a, m - s)
    return _as_output(np.asarray(values, dtype=float), x)


def rl_power_rule_right(
    s: "float | FractionalExponent", m: float, b: float, x: ArrayLike
) -> "float | FloatArray":
    """Right Riemann-Liouville derivative of (b-x)^m with upper limit b."""
    s = _order(s)
    _check_unit_order(s)
    if m < 0:
        raise ValueError(f"power must be non-negative, got {m}")
    xs = np.asarray(x, dtype=float)
    if np.any(xs > b):
        raise ValueError(f"right power rule needs x <= b = {b}")
    with np.errstate(divide="ignore"):
        values = power_rule_factor(m, s) * np.power(b - xs, m - s)
    return _as_output(np.asarray(values, dtype=float), x)


# --- Legendre bases and power expansions ---------------------------------------------


def orthonormal_scale(degree: int, width: float) -> FloatArray:
    """Factors turning Legendre P_m(t) into L2-orthonormal functions on a cell."""
    m = np.arange(degree + 1, dtype=float)
    return np.sqrt((2.0 * m + 1.0) / width)


def _compose_affine(power_t: FloatArray, shift: float, scale: float, size: int) -> FloatArray:
    """Power coefficients in y of p(t) with t = shift + scale * y."""
    composed = Polynomial(power_t)(Polynomial([shift, scale])).coef
    out = np.zeros(size)
    out[: min(size, composed.size)] = composed[:size]
    return out


def legendre_power_table(degree: int, width: float, anchor: Anchor, reflected: bool) -> FloatArray:
    """Power expansions of the orthonormal Legendre modes on a cell of given width.

    Row m holds the coefficients of mode m in powers of y, where
    y = x - anchor (``reflected=False``) or y = anchor - x (``reflected=True``)
    and anchor is the cell's lower or upper endpoint.

    Returns:
        Array of shape (degree + 1, degree + 1).
    """
    size = degree + 1
    base = -1.0 if anchor == "lower" else 1.0
    slope = (2.0 / width) * (-1.0 if reflected else 1.0)
    scale = orthonormal_scale(degree, width)
    table = np.zeros((size, size))
    for m in range(size):
        unit = np.zeros(size)
        unit[m] = scale[m]
        table[m] = _compose_affine(legendre.leg2poly(unit), base, slope, size)
    return table


def fractional_power_table(
    degree: int, width: float, s: float, side: Side
) -> tuple[FloatArray, FloatArray]:
    """Gamma-scaled power tables of the two terms of a one-sided derivative.

    For ``side="left"`` the first table expands about the lower endpoint in
    powers of (x - lower) and the second about the upper endpoint in powers
    of (x - upper). For ``side="right"`` the first expands about the upper
    endpoint in powers of (upper - x), the second about the lower endpoint in
    powers of (lower - x). The derivative is first-term minus second-term.
    """
    factors = power_rule_factor(np.arange(degree + 1, dtype=float), s)
    if side == "left":
        near = legendre_power_table(degree, width, "lower", reflected=False)
        far = legendre_power_table(degree, width, "upper", reflected=False)
    else:
        near = legendre_power_table(degree, width, "upper", reflected=True)
        far = legendre_power_table(degree, width, "lower", reflected=True)
    return near * factors, far * factors


def eval_power_term(coefficients: FloatArray, distance: ArrayLike, s: float) -> FloatArray:
    """Evaluate H(d) d^{-s} sum_m c_m d^m; zero where d <= 0.

    ``coefficients`` may carry leading batch axes; the last axis is the power.
    """
    d = np.asarray(distance, dtype=float)
    positive = d > 0.0
    safe = np.where(positive, d, 1.0)
    poly = np.zeros(np.broadcast_shapes(d.shape, coefficients.shape[:-1]))
    for power in range(coefficients.shape[-1] - 1, -1, -1):
        poly = poly * safe + coefficients[..., power]
    return np.asarray(np.where(positive, poly * safe ** (-s), 0.0), dtype=float)


# --- Cell polynomials ------------------------------------------------------------------


@dataclass(frozen=True)
class CellPolynomial:
    """Polynomial in an orthonormal Legendre basis on [lower, upper], zero outside."""

    lower: float
    upper: float
    coefficients: FloatArray

    def __post_init__(self) -> None:
        if not self.upper > self.lower:
            raise ValueError(
                f"cell support must have positive length, got [{self.lower}, {self.upper}]"
            )
        coefficients = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if coefficients.ndim != 1:
            raise ValueError("cell polynomial coefficients must be a vector")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def degree(self) -> int:
        return int(self.coefficients.size - 1)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @classmethod
    def from_function(
        cls, func: Callable[[FloatArray], FloatArray], lower: float, upper: float, degree: int
    ) -> "CellPolynomial":
        """L2-project a function onto degree-``degree`` polynomials on one cell."""
        nodes, weights = roots_legendre(degree + CONSTANTS.QUADRATURE_EXTRA + 4)
        width = upper - lower
        x = lower + 0.5 * width * (nodes + 1.0)
        modes = legendre.legvander(nodes, degree) * orthonormal_scale(degree, width)
        coefficients = modes.T @ (0.5 * width * weights * func(x))
        return cls(lower, upper, coefficients)

    @classmethod
    def from_power_coefficients(
        cls, power: Sequence[float], lower: float, upper: float
    ) -> "CellPolynomial":
        """Build from coefficients in powers of (x - lower)."""
        power = np.asarray(power, dtype=float)
        return cls.from_function(
            lambda x: Polynomial(power)(x - lower), lower, upper, power.size - 1
        )

    def evaluate_extension(self, x: ArrayLike) -> "float | FloatArray":
        """The polynomial formula at x, ignoring the support (smooth extension)."""
        xs = np.asarray(x, dtype=float)
        t = 2.0 * (xs - self.lower) / self.width - 1.0
        scaled = self.coefficients * orthonormal_scale(self.degree, self.width)
        return _as_output(np.asarray(legendre.legval(t, scaled), dtype=float), x)

    def evaluate(self, x: ArrayLike) -> "float | FloatArray":
        """Zero-extended value at x."""
        xs = np.asarray(x, dtype=float)
        inside = (xs >= self.lower) & (xs <= self.upper)
        values = np.where(inside, self.evaluate_extension(xs), 0.0)
        return _as_output(np.asarray(values, dtype=float), x)

    def power_coefficients(self, about: Anchor = "lower", reflected: bool = False) -> FloatArray:
        """Coefficients in powers of (x - anchor), or (anchor - x) when reflected."""
        table = legendre_power_table(self.degree, self.width, about, reflected)
        return np.asarray(self.coefficients @ table, dtype=float)

    def mirror(self) -> "CellPolynomial":
        """The image under x -> 1 - x."""
        signs = (-1.0) ** np.arange(self.degree + 1)
        return CellPolynomial(1.0 - self.upper, 1.0 - self.lower, self.coefficients * signs)


def _check_domain(x: FloatArray) -> None:
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("evaluation points must lie in [0, 1]")


def _cell_derivative(p: CellPolynomial, s: float, x: ArrayLike, side: Side) -> "float | FloatArray":
    _check_unit_order(s)
    xs = np.asarray(x, dtype=float)
    _check_domain(xs)
    near, far = fractional_power_table(p.degree, p.width, s, side)
    near_c = p.coefficients @ near
    far_c = p.coefficients @ far
    if side == "left":
        values = eval_power_term(near_c, xs - p.lower, s) - eval_power_term(far_c, xs - p.upper, s)
    else:
        values = eval_power_term(near_c, p.upper - xs, s) - eval_power_term(far_c, p.lower - xs, s)
    return _as_output(np.asarray(values, dtype=float), x)


def left_frac_deriv_cellpoly(
    p: CellPolynomial, s: "float | FractionalExponent", x: ArrayLike
) -> "float | FloatArray":
    """Left Riemann-Liouville derivative (lower limit 0) of a zero-extended cell polynomial.

    Zero for x <= a; the power rule on (a, b]; beyond b the difference of the
    derivatives with lower limits a and b of the smooth extension.
    """
    return _cell_derivative(p, _order(s), x, "left")


def right_frac_deriv_cellpoly(
    p: CellPolynomial, s: "float | FractionalExponent", x: ArrayLike
) -> "float | FloatArray":
    """Right Riemann-Liouville derivative (upper limit 1) of a zero-extended cell polynomial."""
    return _cell_derivative(p, _order(s), x, "right")


# --- Quadrature and reference oracles --------------------------------------------------


def gauss_jacobi_rule(n: int, exponent: float) -> tuple[FloatArray, FloatArray]:
    """Gauss-Jacobi rule on (0, 1) for the weight t^exponent.

    Exact for t^exponent times polynomials of degree <= 2n - 1.

    Args:
        n: Number of nodes, n >= 1.
        exponent: Weight exponent in (-1, 0).

    Returns:
        Nodes and weights.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    if not -1.0 < exponent < 0.0:
        raise ValueError(f"Gauss-Jacobi exponent must lie in (-1, 0), got {exponent}")
    u, w = roots_jacobi(n, 0.0, exponent)
    return 0.5 * (u + 1.0), w * 2.0 ** (-(exponent + 1.0))


def grunwald_weights(s: float, count: int) -> FloatArray:
    """Grunwald-Letnikov weights (-1)^j binom(s, j), j < count."""
    j = np.arange(1, count, dtype=float)
    return np.cumprod(np.concatenate(([1.0], 1.0 - (s + 1.0) / j)))


def gl_fractional_derivative(
    samples: ArrayLike,
    s: "float | FractionalExponent",
    grid_step: float,
    side: Side = "left",
    shift: int = 0,
) -> FloatArray:
    """First-order Grunwald-Letnikov approximation of a one-sided derivative.

    Samples beyond the last node (needed when ``shift`` > 0) are taken as zero.

    Args:
        samples: Function values on a uniform grid covering the domain.
        s: Order in (0, 1).
        grid_step: Grid spacing.
        side: "left" (lower limit at the first node) or "right".
        shift: Grunwald shift; 0 is first-order consistent for orders below one.

    Returns:
        Approximate derivative at every node.
    """
    s = _order(s)
    _check_unit_order(s)
    f = np.asarray(samples, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("need at least 2 samples")
    if side == "right":
        return gl_fractional_derivative(f[::-1], s, grid_step, "left", shift)[::-1]
    n = f.size
    padded = np.concatenate((f, np.zeros(shift)))
    conv = np.convolve(padded, grunwald_weights(s, n + shift))[: n + shift]
    return np.asarray(conv[shift : shift + n] / grid_step**s, dtype=float)


def left_frac_integral(
    func: Callable[[FloatArray], FloatArray],
    s: "float | FractionalExponent",
    x: float,
    a: float = 0.0,
    n: int = 16,
) -> float:
    """Left Riemann-Liouville integral of order s in (0, 1), by Gauss-Jacobi quadrature."""
    s = _order(s)
    _check_unit_order(s)
    if x < a:
        raise ValueError(f"integral needs x >= a = {a}")
    if x == a:
        return 0.0
    t, w = gauss_jacobi_rule(n, s - 1.0)
    span = x - a
    return float(span**s / math.gamma(s) * np.dot(w, func(x - span * t)))


def right_frac_integral(
    func: Callable[[FloatArray], FloatArray],
    s: "float | FractionalExponent",
    x: float,
    b: float = 1.0,
    n: int = 16,
) -> float:
    """Right Riemann-Liouville integral of order s in (0, 1), by Gauss-Jacobi quadrature."""
    return left_frac_integral(lambda y: func(b - y), s, b - x, 0.0, n)


def rl_derivative_by_quadrature(
    derivatives: Sequence[Callable[[FloatArray], FloatArray]],
    order: float,
    x: float,
    a: float = 0.0,
    side: Side = "left",
    b: float = 1.0,
    n: int = 24,
) -> float:
    """Reference Riemann-Liouville derivative of a smooth function by quadrature.

    With m - 1 < order < m, the left derivative is

        I^{m-order} f^{(m)}(x) + sum_{j<m} f^{(j)}(a) (x-a)^{j-order} / Gamma(j+1-order),

    the integral taken by Gauss-Jacobi. The right derivative is the left
    derivative of the mirrored function.

    Args:
        derivatives: Callables f, f', ..., at least up to f^{(m)}.
        order: Non-integer positive order.
        x: Evaluation point.
        a: Lower limit (left side).
        side: "left" or "right".
        b: Upper limit (right side).
        n: Quadrature nodes.
    """
    if order <= 0 or float(order).is_integer():
        raise ValueError(f"order must be positive and non-integer, got {order}")
    whole = int(math.floor(order)) + 1
    if len(derivatives) < whole + 1:
        raise ValueError(f"order {order} needs derivatives up to f^({whole})")
    if side == "right":
        mirrored = [
            (lambda j, g: (lambda y: (-1.0) ** j * g(b - y)))(j, g)
            for j, g in enumerate(derivatives)
        ]
        return rl_derivative_by_quadrature(mirrored, order, b - x, 0.0, "left", n=n)
    if x <= a:
        return 0.0
    value = left_frac_integral(derivatives[whole], whole - order, x, a, n)
    for j in range(whole):
        value += float(derivatives[j](np.asarray(a))) * (x - a) ** (j - order) / math.gamma(
            j + 1 - order
        )
    return value
