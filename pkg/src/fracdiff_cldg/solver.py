"""Semi-discrete central LDG system and explicit time stepping.

Both meshes carry a copy of the solution. With u on one mesh, the auxiliary
variables on the partner mesh solve

    G q_L = A u,    G^T q_R = A u,

where G is the partner's fractional Gram and A the zero-trace coupling; the
update of u is then

    du/dt = (M u_partner - u) / tau_max + d B (q_L + q_R) + F,

with M the overlap mass and B = -A^T the flux coupling. Since B = -A^T the
discrete energy ||u_1||^2 + ||u_2||^2 is non-increasing when F = 0.

The system is linear, so on small meshes a whole step is precomputed as one
matrix (StepPropagator) and the time loop only does matrix-vector products.
"""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray

from fracdiff_cldg.assembly import (
    Direction,
    OperatorSet,
    build_operators,
    solve_aux,
    solve_aux_2d,
)
from fracdiff_cldg.config.constants import CONSTANTS, StepCoefficients
from fracdiff_cldg.frac_kernels import FractionalExponent
from fracdiff_cldg.mesh_basis import (
    MESH_TAGS,
    BasisSpec,
    DGField,
    MeshTag,
    OverlappingMesh,
    field_shape,
    l2_project,
    other_tag,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
FluxSide = Literal["left", "right"]


class StabilityViolation(RuntimeError):
    """Raised when the discrete solution stops being finite."""

    def __init__(self, step_index: int, time: float, last_energy: float) -> None:
        self.step_index = step_index
        self.time = time
        self.last_energy = last_energy
        super().__init__(
            f"non-finite solution at step {step_index} (t={time:.6g}); "
            f"last finite energy {last_energy:.6e}"
        )


# --- Problem description ---------------------------------------------------------------


@dataclass(frozen=True)
class SeparableSource:
    """Source of the form sum_i a_i(t) * phi_i(x[, y]).

    Callable like any other source; the time loop precomputes the spatial
    moments of each phi_i once.
    """

    terms: tuple[tuple[Callable[[float], float], Callable[..., Any]], ...]

    def __call__(self, *args: Any) -> Any:
        *space, t = args
        return sum(amplitude(t) * profile(*space) for amplitude, profile in self.terms)


@dataclass(frozen=True)
class ProblemSpec:
    """Space-fractional diffusion problem on the unit interval or square.

    ``source`` is f(x, t) or f(x, y, t) (None means zero), ``initial`` is
    g(x) or g(x, y); all callables must accept numpy arrays.
    """

    dimension: int
    alpha: float
    beta: float
    diffusivity: tuple[float, ...]
    source: Callable[..., Any] | None
    initial: Callable[..., Any]
    t_final: float
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        FractionalExponent.problem_order(self.alpha)
        FractionalExponent.problem_order(self.beta)
        if len(self.diffusivity) != self.dimension:
            raise ValueError(
                f"need {self.dimension} diffusivities, got {len(self.diffusivity)}"
            )
        if any(not d > 0 for d in self.diffusivity):
            raise ValueError(f"diffusivities must be positive, got {self.diffusivity}")
        if not self.t_final > 0:
            raise ValueError(f"final time must be positive, got {self.t_final}")

    def diffusivity_along(self, direction: Direction) -> float:
        return self.diffusivity[0 if direction == "x" else 1]

    def without_source(self) -> "ProblemSpec":
        return replace(self, source=None)


@dataclass(frozen=True)
class TimeControls:
    """Relaxation scale tau_max (also the step bound) and step size tau."""

    tau_max: float
    tau: float
    integrator: str = CONSTANTS.DEFAULT_INTEGRATOR

    def __post_init__(self) -> None:
        if not self.tau_max > 0:
            raise ValueError(f"tau_max must be positive, got {self.tau_max}")
        if not 0 < self.tau <= self.tau_max * (1.0 + 1e-12):
            raise ValueError(
                f"need 0 < tau <= tau_max, got tau={self.tau}, tau_max={self.tau_max}"
            )
        if self.integrator not in CONSTANTS.INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")


def default_controls(
    mesh: OverlappingMesh,
    k: int,
    alpha: float,
    beta: float | None = None,
    coefficients: StepCoefficients | None = None,
    integrator: str = CONSTANTS.DEFAULT_INTEGRATOR,
) -> TimeControls:
    """tau_max = c_max h^{min(alpha, beta)} and tau = c tau_max, from the published table."""
    beta = alpha if beta is None else beta
    if coefficients is None:
        coefficients = CONSTANTS.step_coefficients(mesh.dimension, k)
    order = min(alpha, beta) if mesh.dimension == 2 else alpha
    tau_max = coefficients.tau_max_coeff * mesh.h**order
    return TimeControls(tau_max, coefficients.tau_coeff * tau_max, integrator)


# --- State -----------------------------------------------------------------------------


class EnergyTrace:
    """Append-only (t, energy) log backed by growing numpy buffers."""

    def __init__(self, capacity: int = 1024) -> None:
        self._times = np.empty(max(capacity, 1))
        self._energies = np.empty(max(capacity, 1))
        self._size = 0

    def append(self, t: float, value: float) -> None:
        if self._size == self._times.size:
            self._times = np.concatenate((self._times, np.empty(self._times.size)))
            self._energies = np.concatenate((self._energies, np.empty(self._energies.size)))
        self._times[self._size] = t
        self._energies[self._size] = value
        self._size += 1

    def __len__(self) -> int:
        return self._size

    @property
    def times(self) -> FloatArray:
        return self._times[: self._size]

    @property
    def energies(self) -> FloatArray:
        return self._energies[: self._size]

    def increments(self) -> FloatArray:
        return np.diff(self.energies)

    def max_increment(self) -> float:
        """Largest per-step energy increase (0 if the trace never grows)."""
        if self._size < 2:
            return 0.0
        return float(max(0.0, np.max(self.increments())))

    def is_non_increasing(self, tolerance: float = CONSTANTS.ENERGY_TOLERANCE) -> bool:
        """True if no step raises the energy by more than ``tolerance`` relative to it."""
        if self._size < 2:
            return True
        previous = self.energies[:-1]
        return bool(np.all(self.increments() <= tolerance * previous))


@dataclass(frozen=True)
class SolverState:
    """Both fields at a common time, plus the energy log of the run they belong to."""

    u1: DGField
    u2: DGField
    t: float
    energy_trace: EnergyTrace = field(default_factory=EnergyTrace, compare=False)
    steps: int = 0

    def __post_init__(self) -> None:
        if self.u1.tag != "primal" or self.u2.tag != "dual":
            raise ValueError("u1 must live on the primal mesh and u2 on the dual mesh")
        if self.u1.mesh != self.u2.mesh or self.u1.basis != self.u2.basis:
            raise ValueError("u1 and u2 must share mesh and basis")

    def field_on(self, tag: MeshTag) -> DGField:
        return self.u1 if tag == "primal" else self.u2


def energy(state: SolverState) -> float:
    """||u_1||^2 + ||u_2||^2; the basis is orthonormal."""
    return float(np.sum(state.u1.coefficients**2) + np.sum(state.u2.coefficients**2))


# --- Semi-discrete operator ------------------------------------------------------------


def _along(
    matrix: FloatArray, other: FloatArray, coefficients: FloatArray, direction: Direction
) -> FloatArray:
    """Apply ``matrix`` along ``direction`` and ``other`` across it (2D) or matrix alone (1D)."""
    if coefficients.ndim == 1:
        return matrix @ coefficients
    if direction == "x":
        return matrix @ coefficients @ other.T
    return other @ coefficients @ matrix.T


def _both(matrix: FloatArray, coefficients: FloatArray) -> FloatArray:
    if coefficients.ndim == 1:
        return matrix @ coefficients
    return matrix @ coefficients @ matrix.T


@dataclass(frozen=True)
class AuxiliaryFluxes:
    """q_L and q_R per mesh and direction, keyed by (tag, direction, side)."""

    values: dict[tuple[MeshTag, Direction, FluxSide], FloatArray]

    def total(self, tag: MeshTag, direction: Direction) -> FloatArray:
        return self.values[(tag, direction, "left")] + self.values[(tag, direction, "right")]


def compute_aux(state: SolverState, operators: OperatorSet) -> AuxiliaryFluxes:
    """Auxiliary variables on each mesh from the partner mesh's field."""
    values: dict[tuple[MeshTag, Direction, FluxSide], FloatArray] = {}
    for tag in MESH_TAGS:
        source = state.field_on(other_tag(tag)).coefficients
        for direction in operators.directions:
            rhs = _along(operators.aux[tag], operators.mass[tag], source, direction)
            gram = operators.grams[(tag, direction)]
            solve = solve_aux if source.ndim == 1 else solve_aux_2d
            values[(tag, direction, "left")] = solve(gram, rhs)
            values[(tag, direction, "right")] = solve(gram, rhs, transpose=True)
    return AuxiliaryFluxes(values)


def load_vector(
    operators: OperatorSet, tag: MeshTag, f: Callable[..., Any] | None, t: float
) -> FloatArray:
    """Moments (f(., t), v) against every test function on ``tag``."""
    shape = field_shape(operators.mesh, operators.basis, tag)
    if f is None:
        return np.zeros(shape)
    projected = l2_project(
        lambda *xs: f(*xs, t), tag, operators.mesh, operators.basis, operators.quadrature[tag]
    )
    return projected.coefficients


def semidiscrete_rhs(
    state: SolverState,
    t: float,
    operators: OperatorSet,
    problem: ProblemSpec,
    tau_max: float,
) -> tuple[FloatArray, FloatArray]:
    """Time derivatives of (u_1, u_2) through explicit auxiliary solves."""
    fluxes = compute_aux(state, operators)
    result = []
    for tag in MESH_TAGS:
        partner = other_tag(tag)
        own = state.field_on(tag).coefficients
        partner_field = state.field_on(partner).coefficients
        rate = (_both(operators.mass[tag], partner_field) - own) / tau_max
        for direction in operators.directions:
            divergence = _along(
                operators.flux[tag],
                operators.mass[tag],
                fluxes.total(partner, direction),
                direction,
            )
            rate = rate + problem.diffusivity_along(direction) * divergence
        result.append(rate + load_vector(operators, tag, problem.source, t))
    return result[0], result[1]


class SourceLoader:
    """Load vectors per mesh, with spatial moments cached for separable sources."""

    def __init__(self, operators: OperatorSet, source: Callable[..., Any] | None) -> None:
        self._operators = operators
        self._source = source
        self._moments: dict[MeshTag, list[FloatArray]] = {}
        if isinstance(source, SeparableSource):
            for tag in MESH_TAGS:
                self._moments[tag] = [
                    l2_project(
                        profile, tag, operators.mesh, operators.basis, operators.quadrature[tag]
                    ).coefficients
                    for _, profile in source.terms
                ]

    @property
    def is_separable(self) -> bool:
        return isinstance(self._source, SeparableSource)

    def moments(self, tag: MeshTag) -> list[FloatArray]:
        """Coefficients of each separable profile on ``tag``, in term order."""
        return self._moments[tag]

    def __call__(self, tag: MeshTag, t: float) -> FloatArray:
        if isinstance(self._source, SeparableSource):
            total = np.zeros_like(self._moments[tag][0])
            for (amplitude, _), moment in zip(self._source.terms, self._moments[tag]):
                total += amplitude(t) * moment
            return total
        return load_vector(self._operators, tag, self._source, t)


class LinearEvolution:
    """The semi-discrete right-hand side on a packed (u_1, u_2) vector.

    Uses the precomputed flux responses of the operator set, so each
    evaluation is a handful of dense products; agrees with
    ``semidiscrete_rhs`` to round-off.
    """

    def __init__(self, operators: OperatorSet, problem: ProblemSpec, tau_max: float) -> None:
        if problem.dimension != operators.mesh.dimension:
            raise ValueError("problem and mesh dimensions differ")
        self.operators = operators
        self.problem = problem
        self.tau_max = tau_max
        self.shapes = {tag: field_shape(operators.mesh, operators.basis, tag) for tag in MESH_TAGS}
        self._split = int(np.prod(self.shapes["primal"]))
        self.loader = SourceLoader(operators, problem.source)
        self._response = {
            key: problem.diffusivity_along(key[1]) * matrix
            for key, matrix in operators.flux_response.items()
        }

    def pack(self, u1: FloatArray, u2: FloatArray) -> FloatArray:
        return np.concatenate((u1.reshape(-1), u2.reshape(-1)))

    def unpack(self, packed: FloatArray) -> tuple[FloatArray, FloatArray]:
        return (
            packed[: self._split].reshape(self.shapes["primal"]),
            packed[self._split :].reshape(self.shapes["dual"]),
        )

    def _rate(self, tag: MeshTag, own: FloatArray, partner: FloatArray, t: float) -> FloatArray:
        ops = self.operators
        rate = (_both(ops.mass[tag], partner) - own) / self.tau_max
        if own.ndim == 1:
            rate = rate + self._response[(tag, "x")] @ own
        else:
            round_trip = ops.round_trip_mass[tag]
            rate = rate + self._response[(tag, "x")] @ own @ round_trip.T
            rate = rate + round_trip @ own @ self._response[(tag, "y")].T
        if self.problem.source is not None:
            rate = rate + self.loader(tag, t)
        return rate

    def __call__(self, t: float, packed: FloatArray) -> FloatArray:
        u1, u2 = self.unpack(packed)
        return self.pack(self._rate("primal", u1, u2, t), self._rate("dual", u2, u1, t))

    @property
    def size(self) -> int:
        return self._split + int(np.prod(self.shapes["dual"]))

    def load(self, t: float) -> FloatArray:
        """Packed source loads at time t."""
        return self.pack(self.loader("primal", t), self.loader("dual", t))

    def matrix(self) -> FloatArray:
        """Source-free right-hand side as a dense matrix on packed vectors.

        In 2D the coefficient matrices are flattened row-major, so
        ``A U B^T`` becomes ``kron(A, B) u``.
        """
        ops = self.operators
        blocks: dict[MeshTag, tuple[FloatArray, FloatArray]] = {}
        for tag in MESH_TAGS:
            if ops.mesh.dimension == 1:
                response = self._response[(tag, "x")]
                exchange = ops.mass[tag]
            else:
                round_trip = ops.round_trip_mass[tag]
                response = np.kron(self._response[(tag, "x")], round_trip) + np.kron(
                    round_trip, self._response[(tag, "y")]
                )
                exchange = np.kron(ops.mass[tag], ops.mass[tag])
            own = response - np.eye(response.shape[0]) / self.tau_max
            blocks[tag] = (own, exchange / self.tau_max)
        return np.block(
            [
                [blocks["primal"][0], blocks["primal"][1]],
                [blocks["dual"][1], blocks["dual"][0]],
            ]
        )


# --- Integrators -----------------------------------------------------------------------


Rhs = Callable[[float, FloatArray], FloatArray]


def forward_euler_step(state: FloatArray, t: float, dt: float, rhs: Rhs) -> FloatArray:
    return state + dt * rhs(t, state)


def ssprk33_step(state: FloatArray, t: float, dt: float, rhs: Rhs) -> FloatArray:
    """Three-stage third-order SSP Runge-Kutta step in Shu-Osher form."""

    def rhs_update(t: float, y: FloatArray) -> FloatArray:
        return y + dt * rhs(t, y)

    y1 = rhs_update(t, state)
    y2 = 3 / 4 * state + 1 / 4 * rhs_update(t + dt, y1)
    return 1 / 3 * state + 2 / 3 * rhs_update(t + dt / 2, y2)


INTEGRATORS: dict[str, Callable[[FloatArray, float, float, Rhs], FloatArray]] = {
    "forward_euler": forward_euler_step,
    "ssp_rk3": ssprk33_step,
}


class StepPropagator:
    """One full step of a linear integrator folded into precomputed matrices.

    For y' = L y + s(t) a step of size tau is

        y -> P y + sum_j W_j s(t + c_j tau)

    with P = I + tau L (forward Euler) or the cubic Taylor polynomial of
    tau L (SSP-RK3). Separable sources are folded into the columns
    W_j m_i, so a step is two matrix-vector products.
    """

    def __init__(self, evolution: LinearEvolution, tau: float, integrator: str) -> None:
        if integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {integrator!r}")
        self.tau = tau
        scaled = tau * evolution.matrix()
        identity = np.eye(scaled.shape[0])
        if integrator == "forward_euler":
            self.matrix = identity + scaled
            stages = [(0.0, tau * identity)]
        else:
            squared = scaled @ scaled
            self.matrix = identity + scaled + squared / 2 + squared @ scaled / 6
            stages = [
                (0.0, tau / 6 * (identity + 2 * scaled + squared)),
                (1.0, tau / 6 * (identity + scaled)),
                (0.5, 2 * tau / 3 * identity),
            ]
        self._offsets = tuple(offset for offset, _ in stages)
        self._evolution = evolution
        self._stage_weights: list[FloatArray] = []
        self._amplitudes: tuple[Callable[[float], float], ...] = ()
        self._folded: FloatArray | None = None
        source = evolution.problem.source
        loader = evolution.loader
        if source is None:
            return
        if isinstance(source, SeparableSource):
            moments = [
                evolution.pack(primal, dual)
                for primal, dual in zip(loader.moments("primal"), loader.moments("dual"))
            ]
            self._amplitudes = tuple(amplitude for amplitude, _ in source.terms)
            self._folded = np.column_stack(
                [weight @ moment for _, weight in stages for moment in moments]
            )
        else:
            self._stage_weights = [weight for _, weight in stages]

    def __call__(self, packed: FloatArray, t: float) -> FloatArray:
        advanced = self.matrix @ packed
        if self._folded is not None:
            amplitudes = [
                amplitude(t + offset * self.tau)
                for offset in self._offsets
                for amplitude in self._amplitudes
            ]
            advanced += self._folded @ np.asarray(amplitudes, dtype=float)
        for offset, weight in zip(self._offsets, self._stage_weights):
            advanced += weight @ self._evolution.load(t + offset * self.tau)
        return advanced


def step(
    state: SolverState,
    controls: TimeControls,
    operators: OperatorSet,
    problem: ProblemSpec,
    evolution: LinearEvolution | None = None,
) -> SolverState:
    """Advance both fields by one step of size ``controls.tau``.

    Raises:
        StabilityViolation: If the new coefficients are not finite.
    """
    if evolution is None:
        evolution = LinearEvolution(operators, problem, controls.tau_max)
    packed = evolution.pack(state.u1.coefficients, state.u2.coefficients)
    advanced = INTEGRATORS[controls.integrator](packed, state.t, controls.tau, evolution)
    t_new = state.t + controls.tau
    if not np.all(np.isfinite(advanced)):
        last = float(state.energy_trace.energies[-1]) if len(state.energy_trace) else math.nan
        logger.error(f"Stability violation at step {state.steps + 1}, t={t_new:.6g}")
        raise StabilityViolation(state.steps + 1, t_new, last)
    u1, u2 = evolution.unpack(advanced)
    new_state = SolverState(
        state.u1.with_coefficients(u1, t_new),
        state.u2.with_coefficients(u2, t_new),
        t_new,
        state.energy_trace,
        state.steps + 1,
    )
    state.energy_trace.append(t_new, energy(new_state))
    return new_state


def initial_state(
    problem: ProblemSpec,
    mesh: OverlappingMesh,
    basis: BasisSpec,
    fields: tuple[DGField, DGField] | None = None,
    capacity: int = 1024,
) -> SolverState:
    """L2 projections of g onto both meshes (or the given fields) at t = 0."""
    if fields is None:
        fields = (
            l2_project(problem.initial, "primal", mesh, basis),
            l2_project(problem.initial, "dual", mesh, basis),
        )
    state = SolverState(fields[0], fields[1], 0.0, EnergyTrace(capacity))
    state.energy_trace.append(0.0, energy(state))
    return state


def _advance_full_steps(
    state: SolverState,
    controls: TimeControls,
    evolution: LinearEvolution,
    t_final: float,
    expected_steps: int,
) -> SolverState:
    """Take every full step of size tau before T with a precomputed propagator."""
    started = time.perf_counter()
    propagator = StepPropagator(evolution, controls.tau, controls.integrator)
    logger.debug(
        f"Propagator of size {evolution.size} built in {time.perf_counter() - started:.2f}s"
    )
    trace = state.energy_trace
    packed = evolution.pack(state.u1.coefficients, state.u2.coefficients)
    t, steps = state.t, state.steps
    report_every = max(1, expected_steps // 10)
    while t_final - t > 1e-12 * t_final and t_final - t >= controls.tau:
        packed = propagator(packed, t)
        t += controls.tau
        steps += 1
        value = float(packed @ packed)
        if not math.isfinite(value):
            last = float(trace.energies[-1]) if len(trace) else math.nan
            logger.error(f"Stability violation at step {steps}, t={t:.6g}")
            raise StabilityViolation(steps, t, last)
        trace.append(t, value)
        if steps % report_every == 0:
            logger.debug(f"step {steps}/{expected_steps}, t={t:.6g}")
    u1, u2 = evolution.unpack(packed)
    return SolverState(
        state.u1.with_coefficients(u1, t),
        state.u2.with_coefficients(u2, t),
        t,
        trace,
        steps,
    )


def run(
    problem: ProblemSpec,
    mesh: OverlappingMesh,
    basis: BasisSpec,
    controls: TimeControls,
    operators: OperatorSet | None = None,
    initial_fields: tuple[DGField, DGField] | None = None,
) -> SolverState:
    """Integrate from t = 0 to T; the last step is shortened to land on T.

    Args:
        problem: Problem to solve.
        mesh: Overlapping mesh pair (dimension must match the problem).
        basis: Modal basis.
        controls: Step controls.
        operators: Reuse previously assembled operators.
        initial_fields: Override the projected initial data.

    Returns:
        The final state with the full energy trace.

    Raises:
        StabilityViolation: If the solution blows up.
    """
    if problem.dimension != mesh.dimension:
        raise ValueError(
            f"problem dimension {problem.dimension} does not match mesh {mesh.dimension}"
        )
    if operators is None:
        operators = build_operators(mesh, basis, problem.alpha, problem.beta)
    expected_steps = int(math.ceil(problem.t_final / controls.tau - 1e-9))
    state = initial_state(problem, mesh, basis, initial_fields, expected_steps + 2)
    evolution = LinearEvolution(operators, problem, controls.tau_max)
    logger.info(
        f"Run {problem.name}: N={mesh.cells}, k={basis.k}, tau={controls.tau:.3e}, "
        f"{expected_steps} steps with {controls.integrator}"
    )
    start = time.perf_counter()
    if evolution.size <= CONSTANTS.DENSE_PROPAGATOR_LIMIT:
        state = _advance_full_steps(state, controls, evolution, problem.t_final, expected_steps)
    report_every = max(1, expected_steps // 10)
    final_controls = controls
    while problem.t_final - state.t > 1e-12 * problem.t_final:
        remaining = problem.t_final - state.t
        if remaining < controls.tau:
            final_controls = replace(controls, tau=remaining)
        state = step(state, final_controls, operators, problem, evolution)
        if state.steps % report_every == 0:
            logger.debug(f"step {state.steps}/{expected_steps}, t={state.t:.6g}")
    logger.info(
        f"Finished {problem.name} N={mesh.cells} after {state.steps} steps "
        f"in {time.perf_counter() - start:.2f}s, energy {energy(state):.6e}"
    )
    return state
