"""Constants for the fractional diffusion solver."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Colors:
    """ANSI color codes for terminal output."""

    RED: str = "\033[91m"
    YELLOW: str = "\033[93m"
    GREEN: str = "\033[92m"
    BLUE: str = "\033[94m"
    CYAN: str = "\033[96m"
    RESET: str = "\033[0m"
    BOLD: str = "\033[1m"


@dataclass(frozen=True)
class StepCoefficients:
    """Time-step scaling: tau_max = tau_max_coeff * h**order, tau = tau_coeff * tau_max."""

    tau_max_coeff: float
    tau_coeff: float


@dataclass(frozen=True)
class Constants:
    """Application constants."""

    # Whole-order problem operators live in (1, 2) with this guard band
    ORDER_GUARD: float = 1e-6

    # Default final time of the manufactured examples
    DEFAULT_T_FINAL: float = 0.1

    # Integrators
    INTEGRATORS: tuple[str, ...] = ("ssp_rk3", "forward_euler")
    DEFAULT_INTEGRATOR: str = "ssp_rk3"

    # Runs whose packed state is at most this long step with a dense one-step propagator
    DENSE_PROPAGATOR_LIMIT: int = 1500

    # Quadrature: Gauss-Legendre points per direction are k + QUADRATURE_EXTRA
    QUADRATURE_EXTRA: int = 3

    # Stability monitor: allowed per-step energy increase, relative
    ENERGY_TOLERANCE: float = 1e-12

    # Manufactured residual tolerances: quadrature oracle (absolute) and
    # Grunwald-Letnikov line samples (relative to the source scale)
    RESIDUAL_TOLERANCE: float = 1e-8
    GL_RESIDUAL_TOLERANCE: float = 5e-2
    GL_SAMPLES: int = 4001

    # Report layout
    CSV_COLUMNS: tuple[str, ...] = ("inv_h", "E1", "rate1", "E2", "rate2")
    REPORT_FORMATS: tuple[str, ...] = ("csv", "json")

    # Environment variable prefix for flag overrides
    ENV_PREFIX: str = "FRACDIFF_"

    # Process exit codes
    EXIT_OK: int = 0
    EXIT_CONFIG_ERROR: int = 1
    EXIT_STABILITY_VIOLATION: int = 2

    # Step coefficients per (dimension, k); filled in __post_init__
    STEP_COEFFICIENTS: dict[tuple[int, int], StepCoefficients] = None  # type: ignore[assignment]

    # Mesh presets (values of 1/h); filled in __post_init__
    PRESET_CELLS: dict[tuple[int, int], tuple[int, ...]] = None  # type: ignore[assignment]
    DESK_CELLS: dict[tuple[int, int], tuple[int, ...]] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        """Initialize mutable defaults."""
        object.__setattr__(
            self,
            "STEP_COEFFICIENTS",
            {
                (1, 1): StepCoefficients(tau_max_coeff=0.1, tau_coeff=0.1),
                (1, 2): StepCoefficients(tau_max_coeff=0.005, tau_coeff=0.01),
                (2, 1): StepCoefficients(tau_max_coeff=0.02, tau_coeff=0.1),
            },
        )
        object.__setattr__(
            self,
            "PRESET_CELLS",
            {
                (1, 1): (8, 16, 32, 64, 128, 256),
                (1, 2): (4, 8, 16, 32, 64, 128),
                (2, 1): (4, 8, 12, 16, 20),
            },
        )
        object.__setattr__(
            self,
            "DESK_CELLS",
            {
                (1, 1): (8, 16, 32, 64),
                (1, 2): (4, 8, 16, 32),
                (2, 1): (4, 8, 12, 16),
            },
        )

    def step_coefficients(self, dimension: int, k: int) -> StepCoefficients:
        """Return the time-step coefficients for a (dimension, k) pair.

        Pairs without a published value fall back to the most restrictive
        entry of the same dimension.
        """
        if (dimension, k) in self.STEP_COEFFICIENTS:
            return self.STEP_COEFFICIENTS[(dimension, k)]
        same_dim = [v for (d, _), v in self.STEP_COEFFICIENTS.items() if d == dimension]
        return min(same_dim, key=lambda c: c.tau_max_coeff * c.tau_coeff)

    def preset_cells(self, dimension: int, k: int) -> tuple[int, ...]:
        """Return the full reference mesh list for a (dimension, k) pair."""
        return self.PRESET_CELLS.get((dimension, k), self.PRESET_CELLS[(dimension, 1)])

    def desk_cells(self, dimension: int, k: int) -> tuple[int, ...]:
        """Return the desk-scale mesh list for a (dimension, k) pair."""
        return self.DESK_CELLS.get((dimension, k), self.DESK_CELLS[(dimension, 1)])


# Default instances for easy import
COLORS = Colors()
CONSTANTS = Constants()
