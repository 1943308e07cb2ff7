"""Experimental order of convergence."""

import math
from collections.abc import Sequence


def eoc(error_coarse: float, error_fine: float, h_coarse: float, h_fine: float) -> float:
    """log(E_coarse / E_fine) / log(h_coarse / h_fine).

    Returns NaN when either error is not a positive finite number.
    """
    if h_coarse == h_fine:
        raise ValueError("mesh sizes must differ")
    if not (math.isfinite(error_coarse) and math.isfinite(error_fine)):
        return math.nan
    if error_coarse <= 0 or error_fine <= 0:
        return math.nan
    return math.log(error_coarse / error_fine) / math.log(h_coarse / h_fine)


def convergence_rates(inv_h: Sequence[int], errors: Sequence[float]) -> list[float | None]:
    """Rate for every row after the first (None for the first row)."""
    if len(inv_h) != len(errors):
        raise ValueError("need one error per mesh")
    rates: list[float | None] = [None] * len(errors)
    for i in range(1, len(errors)):
        rates[i] = eoc(errors[i - 1], errors[i], 1.0 / inv_h[i - 1], 1.0 / inv_h[i])
    return rates
