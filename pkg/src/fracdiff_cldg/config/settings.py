"""Runtime settings resolved from defaults, config file, environment and CLI."""

import os
from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from typing import Any

from fracdiff_cldg.config.config_file import PROBLEM_KEYS, ConfigError
from fracdiff_cldg.config.constants import CONSTANTS

PROBLEM_DIMENSIONS: dict[str, int] = {"example1": 1, "example2": 2}


@dataclass
class Settings:
    """Runtime settings configured from CLI, environment and config file."""

    problem: str = "example1"
    dimension: int | None = None  # None = implied by the problem
    alpha: float = 1.5
    beta: float | None = None  # None = same as alpha
    k: int = 1
    cells: tuple[int, ...] = ()  # empty = desk preset for (dimension, k)
    t_final: float = CONSTANTS.DEFAULT_T_FINAL
    tau_max_coeff: float | None = None  # None = published value for (dimension, k)
    tau_coeff: float | None = None
    integrator: str = CONSTANTS.DEFAULT_INTEGRATOR
    out: str | None = None  # None = console
    format: str = "csv"
    workers: int = 1
    seed: int = 0
    random_initial: bool = False
    full_meshes: bool = False  # reference mesh lists instead of desk presets
    log_file: str | None = None
    dump_dir: str | None = None  # run: write the assembled Grams here
    problem_config: dict[str, Any] = field(default_factory=dict)
    debug: bool = field(
        default_factory=lambda: os.environ.get("DEBUG", "").lower() in ("1", "true")
    )

    def __post_init__(self) -> None:
        """Validate and normalize settings."""
        if self.problem not in ("example1", "example2", "custom"):
            raise ConfigError(f"Unknown problem {self.problem!r}")
        if self.dimension is None:
            if self.problem == "custom":
                raise ConfigError("A custom problem needs an explicit dimension")
            self.dimension = PROBLEM_DIMENSIONS[self.problem]
        elif self.dimension != PROBLEM_DIMENSIONS.get(self.problem, self.dimension):
            implied = PROBLEM_DIMENSIONS[self.problem]
            raise ConfigError(f"{self.problem} is {implied}D, got dimension {self.dimension}")
        if self.dimension not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.beta is None:
            self.beta = self.alpha
        lo, hi = 1.0 + CONSTANTS.ORDER_GUARD, 2.0 - CONSTANTS.ORDER_GUARD
        for name, value in (("alpha", self.alpha), ("beta", self.beta)):
            if not lo <= value <= hi:
                raise ConfigError(f"{name} must lie in (1, 2), got {value}")
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")
        if not self.cells:
            presets = CONSTANTS.preset_cells if self.full_meshes else CONSTANTS.desk_cells
            self.cells = presets(self.dimension, self.k)
        if any(n < 2 for n in self.cells):
            raise ConfigError(f"every entry of cells must be >= 2, got {self.cells}")
        if any(b <= a for a, b in zip(self.cells, self.cells[1:])):
            raise ConfigError(f"cells must be strictly increasing, got {self.cells}")
        if self.t_final <= 0:
            raise ConfigError(f"final time must be positive, got {self.t_final}")
        coefficients = CONSTANTS.step_coefficients(self.dimension, self.k)
        if self.tau_max_coeff is None:
            self.tau_max_coeff = coefficients.tau_max_coeff
        if self.tau_coeff is None:
            self.tau_coeff = coefficients.tau_coeff
        if self.tau_max_coeff <= 0 or not 0 < self.tau_coeff <= 1:
            raise ConfigError(
                f"need tau_max_coeff > 0 and 0 < tau_coeff <= 1, "
                f"got {self.tau_max_coeff}, {self.tau_coeff}"
            )
        if self.integrator not in CONSTANTS.INTEGRATORS:
            raise ConfigError(
                f"integrator must be one of {CONSTANTS.INTEGRATORS}, got {self.integrator!r}"
            )
        if self.format not in CONSTANTS.REPORT_FORMATS:
            raise ConfigError(
                f"format must be one of {CONSTANTS.REPORT_FORMATS}, got {self.format!r}"
            )
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.out:
            self.out = os.path.abspath(self.out)

    @classmethod
    def from_sources(
        cls,
        cli_values: Mapping[str, Any],
        env_values: Mapping[str, Any] | None = None,
        file_values: Mapping[str, Any] | None = None,
    ) -> "Settings":
        """Merge sources with precedence defaults < file < environment < CLI.

        Args:
            cli_values: Values given on the command line (None means "not given").
            env_values: Converted FRACDIFF_* overrides.
            file_values: Normalized config file contents.

        Returns:
            Validated settings.
        """
        known = {f.name for f in fields(cls)} - {"problem_config", "debug"}
        merged: dict[str, Any] = {}
        problem_config: dict[str, Any] = {}
        for source in (file_values or {}, env_values or {}, cli_values):
            for key, value in source.items():
                if value is None:
                    continue
                if key in PROBLEM_KEYS:
                    problem_config[key] = value
                elif key in known:
                    merged[key] = value
        return cls(**merged, problem_config=problem_config)
