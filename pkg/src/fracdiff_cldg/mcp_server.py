"""MCP Server exposing the fractional diffusion solver and its studies."""

import logging
import os
import sys
from typing import Any

from mcp.server.fastmcp import FastMCP

from fracdiff_cldg.api import StudyConfig, run_convergence, run_single, run_stability
from fracdiff_cldg.config.config_file import normalize_config
from fracdiff_cldg.config.settings import Settings
from fracdiff_cldg.report import format_json, format_stability_json, format_table

# Configure logging
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LOG_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "mcp.log")

# Create logger
logger = logging.getLogger("fracdiff-mcp")
logger.setLevel(logging.INFO)

# File handler - writes to mcp.log in project root
file_handler = logging.FileHandler(LOG_FILE, encoding="utf-8")
file_handler.setLevel(logging.INFO)
file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
logger.addHandler(file_handler)

# Stderr handler (for MCP stdio compatibility)
stderr_handler = logging.StreamHandler(sys.stderr)
stderr_handler.setLevel(logging.WARNING)  # Only warnings and errors to stderr
stderr_handler.setFormatter(logging.Formatter(LOG_FORMAT))
logger.addHandler(stderr_handler)

# Solver progress goes to the same file
logging.getLogger("fracdiff_cldg").addHandler(file_handler)
logging.getLogger("fracdiff_cldg").setLevel(logging.INFO)

# Create MCP server
mcp = FastMCP("fracdiff")


def _study(
    problem: str,
    alpha: float,
    beta: float | None,
    k: int,
    cells: str | list[int] | None,
    t_final: float | None,
    extra: dict[str, Any] | None = None,
) -> StudyConfig:
    """Resolve tool arguments the same way the CLI resolves flags."""
    values: dict[str, Any] = {
        "problem": problem,
        "alpha": alpha,
        "beta": beta,
        "k": k,
        "cells": cells,
        "t_final": t_final,
        **(extra or {}),
    }
    settings = Settings.from_sources(normalize_config(values))
    return StudyConfig.from_settings(settings)


@mcp.tool()
def solve(
    problem: str = "example1",
    alpha: float = 1.5,
    beta: float | None = None,
    k: int = 1,
    inv_h: int = 16,
    t_final: float | None = None,
    problem_config: dict[str, Any] | None = None,
) -> str:
    """Solve one problem on a single mesh and report the errors at the final time.

    Args:
        problem: example1, example2 or custom.
        alpha: Fractional order in x, in (1, 2).
        beta: Fractional order in y (2D only; defaults to alpha).
        k: Polynomial degree.
        inv_h: Number of cells per direction (1/h).
        t_final: Final time (default 0.1).
        problem_config: Extra keys for custom problems (dimension, d, g, f, exact).

    Returns:
        Step count, final time and L2 errors, or an error message.
    """
    logger.info(
        f"TOOL CALL: solve(problem={problem!r}, alpha={alpha}, beta={beta}, k={k}, "
        f"inv_h={inv_h}, t_final={t_final})"
    )
    try:
        study = _study(problem, alpha, beta, k, [inv_h], t_final, problem_config)
        result = run_single(
            study.problem, inv_h, study.k, study.step_coefficients, study.integrator
        )
        lines = [
            f"{study.problem.name}: 1/h={inv_h}, k={k}, "
            f"{result.state.steps} steps to T={result.state.t:g} ({result.wall_time:.2f}s)"
        ]
        if result.e1 is not None and result.e2 is not None:
            lines.append(f"E1 = {result.e1:.6e}")
            lines.append(f"E2 = {result.e2:.6e}")
        return "\n".join(lines)

    except Exception as e:
        logger.exception("Error solving problem")
        return f"Error: {e}"


@mcp.tool()
def convergence_study(
    problem: str = "example1",
    alpha: float = 1.5,
    beta: float | None = None,
    k: int = 1,
    cells: str | None = None,
    t_final: float | None = None,
    as_json: bool = False,
) -> str:
    """Run a convergence study and return the error/rate table.

    Args:
        problem: example1 or example2 (custom problems need an exact solution).
        alpha: Fractional order in x, in (1, 2).
        beta: Fractional order in y (2D only).
        k: Polynomial degree.
        cells: Comma list of 1/h values (default: desk preset).
        t_final: Final time (default 0.1).
        as_json: Return JSON with metadata instead of a text table.

    Returns:
        Formatted table or JSON report.
    """
    logger.info(
        f"TOOL CALL: convergence_study(problem={problem!r}, alpha={alpha}, beta={beta}, "
        f"k={k}, cells={cells!r}, t_final={t_final})"
    )
    try:
        study = _study(problem, alpha, beta, k, cells, t_final)
        table = run_convergence(study)
        return format_json(table) if as_json else format_table(table)

    except Exception as e:
        logger.exception("Error running convergence study")
        return f"Error: {e}"


@mcp.tool()
def stability_check(
    problem: str = "example1",
    alpha: float = 1.5,
    beta: float | None = None,
    k: int = 1,
    inv_h: int = 16,
    t_final: float | None = None,
    random_initial: bool = False,
    seed: int = 0,
) -> str:
    """Run the source-free problem and check that the discrete energy never grows.

    Args:
        problem: example1, example2 or custom.
        alpha: Fractional order in x, in (1, 2).
        beta: Fractional order in y (2D only).
        k: Polynomial degree.
        inv_h: Number of cells per direction (1/h).
        t_final: Final time (default 0.1).
        random_initial: Start from random coefficients instead of the projected g.
        seed: Seed for random_initial.

    Returns:
        Verdict and energy summary, or an error message.
    """
    logger.info(
        f"TOOL CALL: stability_check(problem={problem!r}, alpha={alpha}, beta={beta}, "
        f"k={k}, inv_h={inv_h}, random_initial={random_initial}, seed={seed})"
    )
    try:
        study = _study(
            problem,
            alpha,
            beta,
            k,
            [inv_h],
            t_final,
            {"random_initial": random_initial, "seed": seed},
        )
        report = run_stability(study)
        if report.violation:
            return f"Energy NOT stable: {report.violation}"
        verdict = "non-increasing" if report.non_increasing else "NOT monotone"
        summary = [
            f"Energy {verdict} over {len(report.times)} samples at 1/h={inv_h}",
            f"initial {report.energies[0]:.6e}, final {report.energies[-1]:.6e}",
            f"max increment {report.max_increment:.3e}",
        ]
        if not report.non_increasing:
            summary.append(format_stability_json(report))
        return "\n".join(summary)

    except Exception as e:
        logger.exception("Error checking stability")
        return f"Error: {e}"


def main() -> None:
    """Run the MCP server."""
    logger.info("Starting fracdiff MCP server")
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()
