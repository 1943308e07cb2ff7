"""Library API: single runs, convergence studies and stability sweeps."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from fracdiff_cldg.assembly import OperatorSet
from fracdiff_cldg.config.config_file import ConfigError
from fracdiff_cldg.config.constants import CONSTANTS, StepCoefficients
from fracdiff_cldg.config.settings import Settings
from fracdiff_cldg.mesh_basis import (
    MESH_TAGS,
    BasisSpec,
    DGField,
    build_mesh,
    l2_error,
    zero_field,
)
from fracdiff_cldg.problems import ManufacturedProblem, problem_from_config
from fracdiff_cldg.solver import (
    ProblemSpec,
    SolverState,
    StabilityViolation,
    default_controls,
    energy,
    run,
)
from fracdiff_cldg.utils.rates import convergence_rates

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StudyConfig:
    """A resolved study: the problem object plus mesh list and step controls."""

    problem: ProblemSpec
    cells: tuple[int, ...]
    k: int = 1
    coefficients: StepCoefficients | None = None  # None = published value for (dimension, k)
    integrator: str = CONSTANTS.DEFAULT_INTEGRATOR
    workers: int = 1
    seed: int = 0
    random_initial: bool = False

    def __post_init__(self) -> None:
        if not self.cells:
            raise ConfigError("need at least one mesh")
        if any(n < 2 for n in self.cells):
            raise ConfigError(f"every entry of cells must be >= 2, got {self.cells}")
        if any(b <= a for a, b in zip(self.cells, self.cells[1:])):
            raise ConfigError(f"cells must be strictly increasing, got {self.cells}")
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")

    @property
    def step_coefficients(self) -> StepCoefficients:
        if self.coefficients is not None:
            return self.coefficients
        return CONSTANTS.step_coefficients(self.problem.dimension, self.k)

    @classmethod
    def from_settings(cls, settings: Settings) -> "StudyConfig":
        """Build the problem named by the settings and wrap it in a study."""
        config: dict[str, Any] = {
            "problem": settings.problem,
            "dimension": settings.dimension,
            "alpha": settings.alpha,
            "beta": settings.beta,
            "t_final": settings.t_final,
            **settings.problem_config,
        }
        problem = problem_from_config(config)
        assert settings.tau_max_coeff is not None and settings.tau_coeff is not None
        return cls(
            problem=problem,
            cells=tuple(settings.cells),
            k=settings.k,
            coefficients=StepCoefficients(settings.tau_max_coeff, settings.tau_coeff),
            integrator=settings.integrator,
            workers=settings.workers,
            seed=settings.seed,
            random_initial=settings.random_initial,
        )


@dataclass
class RunResult:
    """Outcome of one solver run."""

    inv_h: int
    state: SolverState
    e1: float | None  # primal L2 error at T (None without an exact solution)
    e2: float | None  # dual L2 error at T
    wall_time: float


@dataclass
class ConvergenceRow:
    """One mesh of a convergence study."""

    inv_h: int
    e1: float
    e2: float
    rate1: float | None = None
    rate2: float | None = None
    failure: str | None = None


@dataclass
class ConvergenceTable:
    """Rows plus study metadata."""

    rows: list[ConvergenceRow]
    metadata: dict[str, Any] = field(default_factory=dict)


@dataclass
class StabilityReport:
    """Energy trace of a source-free run and its monotonicity verdict."""

    inv_h: int
    times: list[float]
    energies: list[float]
    non_increasing: bool
    max_increment: float
    violation: str | None = None


def _exact_at(problem: ProblemSpec, t: float) -> Any:
    if not isinstance(problem, ManufacturedProblem) or problem.exact is None:
        return None
    exact = problem.exact
    return lambda *space: exact(*space, t)


def run_single(
    problem: ProblemSpec,
    inv_h: int,
    k: int = 1,
    coefficients: StepCoefficients | None = None,
    integrator: str = CONSTANTS.DEFAULT_INTEGRATOR,
    operators: OperatorSet | None = None,
    initial_fields: tuple[DGField, DGField] | None = None,
) -> RunResult:
    """Solve on one mesh and measure both L2 errors at T when the exact solution is known.

    Raises:
        StabilityViolation: If the solution blows up.
    """
    start = time.perf_counter()
    mesh = build_mesh(problem.dimension, inv_h)
    basis = BasisSpec(k, problem.dimension)
    controls = default_controls(mesh, k, problem.alpha, problem.beta, coefficients, integrator)
    state = run(problem, mesh, basis, controls, operators, initial_fields)
    exact = _exact_at(problem, state.t)
    e1 = l2_error(state.u1, exact) if exact is not None else None
    e2 = l2_error(state.u2, exact) if exact is not None else None
    return RunResult(inv_h, state, e1, e2, time.perf_counter() - start)


def _convergence_row(study: StudyConfig, inv_h: int) -> ConvergenceRow:
    try:
        result = run_single(
            study.problem, inv_h, study.k, study.step_coefficients, study.integrator
        )
    except StabilityViolation as e:
        logger.warning(f"1/h={inv_h}: {e}")
        return ConvergenceRow(inv_h, math.nan, math.nan, failure=str(e))
    assert result.e1 is not None and result.e2 is not None
    logger.info(
        f"1/h={inv_h}: E1={result.e1:.4e} E2={result.e2:.4e} "
        f"({result.state.steps} steps, {result.wall_time:.2f}s)"
    )
    return ConvergenceRow(inv_h, result.e1, result.e2)


def study_metadata(study: StudyConfig) -> dict[str, Any]:
    coefficients = study.step_coefficients
    return {
        "problem": study.problem.name,
        "dimension": study.problem.dimension,
        "alpha": study.problem.alpha,
        "beta": study.problem.beta,
        "k": study.k,
        "t_final": study.problem.t_final,
        "tau_max_coeff": coefficients.tau_max_coeff,
        "tau_coeff": coefficients.tau_coeff,
        "integrator": study.integrator,
    }


def run_convergence(study: StudyConfig) -> ConvergenceTable:
    """One run per mesh, errors at T and rates between consecutive meshes.

    A mesh whose run blows up is recorded with NaN errors and the study goes on.

    Raises:
        ConfigError: If the problem has no exact solution.
    """
    if _exact_at(study.problem, 0.0) is None:
        raise ConfigError(f"problem {study.problem.name!r} has no exact solution to compare with")
    start = time.perf_counter()
    logger.info(f"Convergence study over 1/h = {list(study.cells)} with {study.workers} worker(s)")
    if study.workers > 1:
        with ThreadPoolExecutor(max_workers=study.workers) as pool:
            rows = list(pool.map(lambda n: _convergence_row(study, n), study.cells))
    else:
        rows = [_convergence_row(study, n) for n in study.cells]
    rates1 = convergence_rates(study.cells, [row.e1 for row in rows])
    rates2 = convergence_rates(study.cells, [row.e2 for row in rows])
    for row, r1, r2 in zip(rows, rates1, rates2):
        row.rate1, row.rate2 = r1, r2
    metadata = study_metadata(study)
    metadata["wall_time"] = time.perf_counter() - start
    metadata["failures"] = [
        {"inv_h": row.inv_h, "message": row.failure} for row in rows if row.failure
    ]
    return ConvergenceTable(rows, metadata)


def random_initial_fields(
    problem: ProblemSpec, inv_h: int, k: int, seed: int
) -> tuple[DGField, DGField]:
    """Standard-normal coefficients on both meshes, reproducible from the seed."""
    mesh = build_mesh(problem.dimension, inv_h)
    basis = BasisSpec(k, problem.dimension)
    rng = np.random.default_rng(seed)
    fields = []
    for tag in MESH_TAGS:
        template = zero_field(mesh, basis, tag)
        fields.append(template.with_coefficients(rng.standard_normal(template.coefficients.shape)))
    return fields[0], fields[1]


def run_stability(study: StudyConfig, inv_h: int | None = None) -> StabilityReport:
    """Source-free run on one mesh (the first of the study by default) with its energy trace."""
    inv_h = study.cells[0] if inv_h is None else inv_h
    problem = study.problem.without_source()
    initial = (
        random_initial_fields(problem, inv_h, study.k, study.seed)
        if study.random_initial
        else None
    )
    try:
        result = run_single(
            problem,
            inv_h,
            study.k,
            study.step_coefficients,
            study.integrator,
            initial_fields=initial,
        )
    except StabilityViolation as e:
        logger.warning(f"Stability run at 1/h={inv_h} failed: {e}")
        return StabilityReport(inv_h, [], [], False, math.inf, str(e))
    trace = result.state.energy_trace
    report = StabilityReport(
        inv_h,
        trace.times.tolist(),
        trace.energies.tolist(),
        trace.is_non_increasing(),
        trace.max_increment(),
    )
    verdict = "non-increasing" if report.non_increasing else "NOT monotone"
    logger.info(
        f"Stability 1/h={inv_h}: energy {verdict}, final {energy(result.state):.6e}, "
        f"max increment {report.max_increment:.3e}"
    )
    return report

