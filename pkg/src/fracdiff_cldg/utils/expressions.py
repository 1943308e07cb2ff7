"""Turn config values (numbers, formulas, tables) into vectorized functions."""

from collections.abc import Callable, Mapping, Sequence
from tokenize import TokenError
from typing import Any

import numpy as np
import sympy as sp
from numpy.typing import NDArray
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import parse_expr

from fracdiff_cldg.config.config_file import ConfigError

FloatArray = NDArray[np.float64]

VARIABLES: tuple[str, ...] = ("x", "y", "t")

FUNCTIONS: dict[str, Any] = {
    name: getattr(sp, name)
    for name in (
        "sin", "cos", "tan", "asin", "acos", "atan",
        "sinh", "cosh", "tanh", "exp", "log", "sqrt", "Abs",
    )
}

# What the parser itself needs besides the user-visible namespace
_PARSER_GLOBALS: dict[str, Any] = {
    "Integer": sp.Integer,
    "Float": sp.Float,
    "Rational": sp.Rational,
    "Symbol": sp.Symbol,
    "Function": sp.Function,
}


def _broadcasting(func: Callable[..., Any]) -> Callable[..., FloatArray]:
    def evaluate(*args: Any) -> FloatArray:
        values = np.asarray(func(*args), dtype=float)
        shape = np.broadcast_shapes(values.shape, *(np.shape(a) for a in args))
        return np.broadcast_to(values, shape)

    return evaluate


def compile_expression(text: str, variables: Sequence[str]) -> Callable[..., FloatArray]:
    """Parse a formula such as "exp(2*t)*x**3*(1-x)**3" into a numpy function.

    Args:
        text: Formula in the names x, y, t, pi, E and the elementary functions.
        variables: Positional argument names of the result, e.g. ("x", "t").

    Returns:
        Function of the given variables that broadcasts its arguments.

    Raises:
        ConfigError: On syntax errors, unknown functions, or free names that
            are not among ``variables``.
    """
    symbols = {name: sp.Symbol(name, real=True) for name in VARIABLES}
    namespace: dict[str, Any] = {**symbols, **FUNCTIONS, "pi": sp.pi, "E": sp.E, "e": sp.E}
    try:
        expr = parse_expr(text, local_dict=namespace, global_dict=dict(_PARSER_GLOBALS))
    except (SyntaxError, TokenError, TypeError, ValueError, NameError, sp.SympifyError) as e:
        raise ConfigError(f"Cannot parse expression {text!r}: {e}") from e
    if not isinstance(expr, sp.Expr):
        raise ConfigError(f"Expression {text!r} is not a scalar formula")
    unknown_functions = expr.atoms(AppliedUndef)
    if unknown_functions:
        names = sorted(str(f.func) for f in unknown_functions)
        raise ConfigError(f"Unknown functions {names} in {text!r}")
    allowed = {symbols[name] for name in variables}
    stray = expr.free_symbols - allowed
    if stray:
        names = sorted(str(s) for s in stray)
        raise ConfigError(f"Expression {text!r} uses {names}; allowed names are {list(variables)}")
    func = sp.lambdify([symbols[name] for name in variables], expr, modules="numpy")
    return _broadcasting(func)


def tabulated_function(data: Mapping[str, Any]) -> Callable[..., FloatArray]:
    """Linear interpolation in x of {"x": [...], "values": [...]}; other arguments are ignored."""
    try:
        xs = np.asarray(data["x"], dtype=float)
        values = np.asarray(data["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Tabulated data needs numeric 'x' and 'values' lists: {e}") from e
    if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
        raise ConfigError("Tabulated 'x' and 'values' must be equal-length lists of >= 2 numbers")
    if np.any(np.diff(xs) <= 0):
        raise ConfigError("Tabulated 'x' must be strictly increasing")

    def interpolate(x: Any, *_: Any) -> FloatArray:
        return np.asarray(np.interp(x, xs, values), dtype=float)

    return interpolate


def function_from_config(
    value: Any, variables: Sequence[str], dimension: int
) -> Callable[..., FloatArray]:
    """Build a function from a number, a formula string or a 1D table."""
    if isinstance(value, bool):
        raise ConfigError(f"Expected a number, formula or table, got {value!r}")
    if isinstance(value, (int, float)):
        return compile_expression(repr(float(value)), variables)
    if isinstance(value, str):
        return compile_expression(value, variables)
    if isinstance(value, Mapping):
        if dimension != 1:
            raise ConfigError("Tabulated data is only supported in 1D")
        return tabulated_function(value)
    raise ConfigError(f"Expected a number, formula or table, got {value!r}")
