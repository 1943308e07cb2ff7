"""Utility modules for fracdiff-cldg."""

from fracdiff_cldg.utils.expressions import compile_expression, function_from_config
from fracdiff_cldg.utils.rates import convergence_rates, eoc

__all__ = ["compile_expression", "function_from_config", "convergence_rates", "eoc"]
