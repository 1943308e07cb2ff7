"""fracdiff-cldg - Central LDG solver for space-fractional diffusion on overlapping meshes."""

__version__ = "1.0.0"

from fracdiff_cldg.api import (
    ConvergenceRow,
    ConvergenceTable,
    StabilityReport,
    StudyConfig,
    run_convergence,
    run_single,
    run_stability,
)
from fracdiff_cldg.problems import example1, example2, problem_from_config
from fracdiff_cldg.report import emit_report

__all__ = [
    "ConvergenceRow",
    "ConvergenceTable",
    "StabilityReport",
    "StudyConfig",
    "run_convergence",
    "run_single",
    "run_stability",
    "example1",
    "example2",
    "problem_from_config",
    "emit_report",
]
