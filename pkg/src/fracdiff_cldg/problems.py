"""Manufactured test problems and user-defined problems."""

import logging
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import ArrayLike, NDArray

from fracdiff_cldg.config.config_file import ConfigError
from fracdiff_cldg.config.constants import CONSTANTS
from fracdiff_cldg.frac_kernels import (
    FractionalExponent,
    gl_fractional_derivative,
    power_rule_factor,
    rl_derivative_by_quadrature,
)
from fracdiff_cldg.solver import ProblemSpec, SeparableSource
from fracdiff_cldg.utils.expressions import function_from_config

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# x^3 (1-x)^3 = x^3 - 3x^4 + 3x^5 - x^6
BRIDGE_POWERS = np.arange(3, 7, dtype=float)
BRIDGE_COEFFICIENTS = np.array([1.0, -3.0, 3.0, -1.0])
BRIDGE = Polynomial([0.0, 0.0, 0.0, 1.0, -3.0, 3.0, -1.0])

EXAMPLE2_AMPLITUDE = 1000.0


def bridge_profile(x: ArrayLike) -> FloatArray:
    """x^3 (1 - x)^3."""
    return np.asarray(BRIDGE(np.asarray(x, dtype=float)), dtype=float)


def bridge_frac_deriv(
    alpha: "float | FractionalExponent", side: Literal["left", "right"], x: ArrayLike
) -> "float | FloatArray":
    """Riemann-Liouville derivative of order alpha in (1, 2) of x^3 (1-x)^3 on [0, 1].

    Termwise power rule on the monomial expansion; the right derivative is the
    left one at 1 - x since the profile is symmetric.
    """
    order = float(FractionalExponent.problem_order(float(alpha)))
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise ValueError("x must lie in [0, 1]")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    z = xs if side == "left" else 1.0 - xs
    factors = BRIDGE_COEFFICIENTS * power_rule_factor(BRIDGE_POWERS, order)
    values = np.sum(factors * np.power(z[..., None], BRIDGE_POWERS - order), axis=-1)
    return float(values) if xs.ndim == 0 else np.asarray(values, dtype=float)


def bridge_two_sided(alpha: float) -> Callable[[ArrayLike], FloatArray]:
    """x -> left + right derivatives of order alpha of the bridge profile."""

    def two_sided(x: ArrayLike) -> FloatArray:
        return np.asarray(
            bridge_frac_deriv(alpha, "left", x), dtype=float
        ) + np.asarray(bridge_frac_deriv(alpha, "right", x), dtype=float)

    return two_sided


@dataclass(frozen=True)
class SeparableExact:
    """u = amplitude(t) * prod_i factor_i(x_i) with polynomial factors."""

    amplitude: Callable[[float], float]
    amplitude_rate: Callable[[float], float]
    factors: tuple[Polynomial, ...]

    def __call__(self, *args: Any) -> FloatArray:
        *space, t = args
        value = np.asarray(self.amplitude(t), dtype=float)
        for factor, coordinate in zip(self.factors, space):
            value = value * factor(np.asarray(coordinate, dtype=float))
        return np.asarray(value, dtype=float)


@dataclass(frozen=True)
class ManufacturedProblem(ProblemSpec):
    """A problem whose exact solution is known."""

    exact: Callable[..., Any] | None = None
    separable: SeparableExact | None = None


def example1(alpha: float, t_final: float = CONSTANTS.DEFAULT_T_FINAL) -> ManufacturedProblem:
    """u = e^{2t} x^3 (1-x)^3 with d = 1."""
    two_sided = bridge_two_sided(alpha)
    source = SeparableSource(
        (
            (lambda t: 2.0 * math.exp(2.0 * t), bridge_profile),
            (lambda t: -math.exp(2.0 * t), two_sided),
        )
    )
    separable = SeparableExact(
        amplitude=lambda t: math.exp(2.0 * t),
        amplitude_rate=lambda t: 2.0 * math.exp(2.0 * t),
        factors=(BRIDGE,),
    )
    return ManufacturedProblem(
        dimension=1,
        alpha=alpha,
        beta=alpha,
        diffusivity=(1.0,),
        source=source,
        initial=bridge_profile,
        t_final=t_final,
        name="example1",
        exact=separable,
        separable=separable,
    )


def riesz_diffusivity(order: float) -> float:
    """-1 / (2 cos(order pi / 2)); positive for orders in (1, 2)."""
    return -1.0 / (2.0 * math.cos(order * math.pi / 2.0))


def example2(
    alpha: float, beta: float | None = None, t_final: float = CONSTANTS.DEFAULT_T_FINAL
) -> ManufacturedProblem:
    """u = 1000 e^t x^3(1-x)^3 y^3(1-y)^3 with Riesz-normalized diffusivities."""
    beta = alpha if beta is None else beta
    d1, d2 = riesz_diffusivity(alpha), riesz_diffusivity(beta)
    along_x = bridge_two_sided(alpha)
    along_y = bridge_two_sided(beta)
    a = EXAMPLE2_AMPLITUDE

    def initial(x: ArrayLike, y: ArrayLike) -> FloatArray:
        return a * bridge_profile(x) * bridge_profile(y)

    source = SeparableSource(
        (
            (lambda t: a * math.exp(t), lambda x, y: bridge_profile(x) * bridge_profile(y)),
            (lambda t: -a * d1 * math.exp(t), lambda x, y: along_x(x) * bridge_profile(y)),
            (lambda t: -a * d2 * math.exp(t), lambda x, y: bridge_profile(x) * along_y(y)),
        )
    )
    separable = SeparableExact(
        amplitude=lambda t: a * math.exp(t),
        amplitude_rate=lambda t: a * math.exp(t),
        factors=(BRIDGE, BRIDGE),
    )
    return ManufacturedProblem(
        dimension=2,
        alpha=alpha,
        beta=beta,
        diffusivity=(d1, d2),
        source=source,
        initial=initial,
        t_final=t_final,
        name="example2",
        exact=separable,
        separable=separable,
    )


# --- Residual checks -------------------------------------------------------------------


def _quadrature_two_sided(factor: Polynomial, order: float, x: float) -> float:
    derivatives = [factor, factor.deriv(1), factor.deriv(2)]
    left = rl_derivative_by_quadrature(derivatives, order, x, side="left")
    right = rl_derivative_by_quadrature(derivatives, order, x, side="right")
    return left + right


def _gl_two_sided(line: Callable[[FloatArray], FloatArray], order: float, x: float) -> float:
    """Left + right derivative of order in (1, 2) from a Grunwald-Letnikov line sample.

    D^order = d/dx D^{order-1} on the left and -d/dx D^{order-1} on the right.
    """
    grid = np.linspace(0.0, 1.0, CONSTANTS.GL_SAMPLES)
    step = grid[1] - grid[0]
    samples = line(grid)
    left = np.gradient(gl_fractional_derivative(samples, order - 1.0, step, "left"), step)
    right = -np.gradient(gl_fractional_derivative(samples, order - 1.0, step, "right"), step)
    return float(np.interp(x, grid, left + right))


def _time_rate(exact: Callable[..., Any], space: tuple[float, ...], t: float) -> float:
    delta = 1e-6
    lower = max(t - delta, 0.0)
    upper = t + delta
    return float((exact(*space, upper) - exact(*space, lower)) / (upper - lower))


def manufactured_residual(
    problem: ManufacturedProblem, points: ArrayLike, times: ArrayLike
) -> float:
    """Max |u_t - sum_i d_i (left + right derivatives along x_i) u - f| over samples.

    Separable polynomial solutions use the quadrature oracle; other exact
    solutions use Grunwald-Letnikov line samples and a centered time difference.

    Args:
        problem: Problem with an exact solution.
        points: Shape (n,) in 1D or (n, 2) in 2D, inside the domain.
        times: Shape (n,).
    """
    if problem.exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    pts = np.asarray(points, dtype=float).reshape(-1, problem.dimension)
    ts = np.asarray(times, dtype=float).reshape(-1)
    if pts.shape[0] != ts.size:
        raise ValueError("points and times must have the same length")
    orders = (problem.alpha, problem.beta)[: problem.dimension]
    worst = 0.0
    for space_row, t in zip(pts, ts):
        space = tuple(float(c) for c in space_row)
        if problem.separable is not None:
            sep = problem.separable
            values = [float(f(c)) for f, c in zip(sep.factors, space)]
            rate = sep.amplitude_rate(t) * float(np.prod(values))
            diffusion = 0.0
            for axis, (factor, order) in enumerate(zip(sep.factors, orders)):
                others = float(np.prod([v for i, v in enumerate(values) if i != axis]))
                diffusion += (
                    problem.diffusivity[axis]
                    * sep.amplitude(t)
                    * others
                    * _quadrature_two_sided(factor, order, space[axis])
                )
        else:
            exact = problem.exact
            rate = _time_rate(exact, space, t)
            diffusion = 0.0
            for axis, order in enumerate(orders):

                def line(grid: FloatArray, axis: int = axis) -> FloatArray:
                    coords = [np.full_like(grid, c) for c in space]
                    coords[axis] = grid
                    return np.asarray(exact(*coords, t), dtype=float)

                diffusion += problem.diffusivity[axis] * _gl_two_sided(line, order, space[axis])
        source = 0.0 if problem.source is None else float(problem.source(*space, t))
        worst = max(worst, abs(rate - diffusion - source))
    return worst


# --- Configured problems ---------------------------------------------------------------


def _required_float(config: Mapping[str, Any], key: str) -> float:
    if key not in config or config[key] is None:
        raise ConfigError(f"Custom problem needs {key!r}")
    try:
        return float(config[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for {key!r}: {config[key]!r}") from e


def custom_problem(config: Mapping[str, Any]) -> ProblemSpec:
    """Build a problem from config keys.

    Keys: alpha (required), beta, dimension (default 1), d or d1/d2 (default
    1), g (default 0), f (default none), exact (optional), t_final or T.
    Values of g, f and exact are numbers, formulas in x[, y][, t], or (1D
    only) tables. With an exact solution the result is a
    ``ManufacturedProblem`` and a residual spot check is logged.

    Raises:
        ConfigError: If a value is missing or malformed.
    """
    dimension = int(config.get("dimension", 1))
    if dimension not in (1, 2):
        raise ConfigError(f"dimension must be 1 or 2, got {dimension}")
    alpha = _required_float(config, "alpha")
    beta = float(config["beta"]) if config.get("beta") is not None else alpha
    if dimension == 1:
        diffusivity: tuple[float, ...] = (float(config.get("d", config.get("d1", 1.0))),)
    else:
        diffusivity = (float(config.get("d1", 1.0)), float(config.get("d2", 1.0)))
    space = ("x",) if dimension == 1 else ("x", "y")
    initial = function_from_config(config.get("g", 0.0), space, dimension)
    source = (
        function_from_config(config["f"], (*space, "t"), dimension)
        if config.get("f") is not None
        else None
    )
    t_final = float(config.get("t_final", config.get("T", CONSTANTS.DEFAULT_T_FINAL)))
    try:
        if config.get("exact") is None:
            return ProblemSpec(dimension, alpha, beta, diffusivity, source, initial, t_final)
        exact = function_from_config(config["exact"], (*space, "t"), dimension)
        problem = ManufacturedProblem(
            dimension, alpha, beta, diffusivity, source, initial, t_final, "custom", exact
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e
    spot_check(problem)
    return problem


def spot_check(problem: ManufacturedProblem, samples: int = 20, seed: int = 0) -> float:
    """Log a warning when the source does not match the exact solution."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.05, 0.95, size=(samples, problem.dimension))
    times = rng.uniform(0.0, problem.t_final, size=samples)
    residual = manufactured_residual(problem, points, times)
    if problem.separable is not None:
        tolerance = CONSTANTS.RESIDUAL_TOLERANCE
    else:
        sources = [
            float(problem.source(*p, t)) if problem.source else 0.0 for p, t in zip(points, times)
        ]
        scale = max(1.0, float(np.max(np.abs(sources))))
        tolerance = CONSTANTS.GL_RESIDUAL_TOLERANCE * scale
    if residual > tolerance:
        logger.warning(
            f"Source of {problem.name!r} does not match its exact solution: "
            f"residual {residual:.3e} > {tolerance:.1e}"
        )
    else:
        logger.info(f"Residual check for {problem.name!r} passed ({residual:.3e})")
    return residual


def problem_from_config(config: Mapping[str, Any]) -> ProblemSpec:
    """Dispatch on config["problem"]: example1, example2 or custom."""
    name = config.get("problem", "example1")
    t_final = float(config.get("t_final", CONSTANTS.DEFAULT_T_FINAL))
    if name == "custom":
        try:
            return custom_problem(config)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid custom problem: {e}") from e
    if name not in ("example1", "example2"):
        raise ConfigError(f"Unknown problem {name!r}")
    alpha = _required_float(config, "alpha")
    try:
        if name == "example1":
            return example1(alpha, t_final)
        beta = config.get("beta")
        return example2(alpha, None if beta is None else float(beta), t_final)
    except ValueError as e:
        raise ConfigError(str(e)) from e
