"""Main entry point for the fracdiff-cldg CLI."""

import argparse
import logging
import sys
from typing import NoReturn

from fracdiff_cldg.api import StudyConfig, run_convergence, run_single, run_stability
from fracdiff_cldg.assembly import OperatorSet, build_operators, dump_grams
from fracdiff_cldg.config.config_file import (
    ConfigError,
    env_overrides,
    load_config_file,
    normalize_config,
)
from fracdiff_cldg.config.constants import COLORS, CONSTANTS
from fracdiff_cldg.config.settings import Settings
from fracdiff_cldg.mesh_basis import BasisSpec, build_mesh
from fracdiff_cldg.report import emit_report, emit_stability_report, format_table
from fracdiff_cldg.solver import StabilityViolation

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

logger = logging.getLogger("fracdiff_cldg")


class CliArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the config-error code."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(CONSTANTS.EXIT_CONFIG_ERROR)


# Flag values stay strings here; normalize_config converts them like config-file values
SETTING_FLAGS: tuple[str, ...] = (
    "problem", "dimension", "alpha", "beta", "k", "cells", "t_final",
    "tau_max_coeff", "tau_coeff", "integrator", "out", "format",
    "workers", "seed", "random_initial", "full_meshes", "log_file", "dump_dir",
)


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by every subcommand; None means "not given"."""
    parser.add_argument(
        "--problem", default=None, help="example1, example2 or custom (default: example1)"
    )
    parser.add_argument("--dimension", default=None, help="1 or 2 (implied by example problems)")
    parser.add_argument("--alpha", default=None, help="Order in x, in (1, 2)")
    parser.add_argument("--beta", default=None, help="Order in y (default: alpha)")
    parser.add_argument("--k", default=None, help="Polynomial degree (default: 1)")
    parser.add_argument("--cells", default=None, help="Comma list of 1/h values, e.g. 8,16,32")
    parser.add_argument("--tmax-final", dest="t_final", default=None, help="Final time T")
    parser.add_argument("--tau-max-coeff", default=None, help="tau_max = coeff * h**order")
    parser.add_argument("--tau-coeff", default=None, help="tau = coeff * tau_max")
    parser.add_argument(
        "--integrator", default=None, help=f"One of {', '.join(CONSTANTS.INTEGRATORS)}"
    )
    parser.add_argument(
        "--out", "-o", default=None, help="Write the report to a file instead of stdout"
    )
    parser.add_argument(
        "--format", default=None, help=f"One of {', '.join(CONSTANTS.REPORT_FORMATS)}"
    )
    parser.add_argument("--config", "-c", default=None, help="JSON config file")
    parser.add_argument("--workers", default=None, help="Parallel rows for converge")
    parser.add_argument("--seed", default=None, help="Seed for --random-initial")
    parser.add_argument(
        "--random-initial",
        action="store_true",
        default=None,
        help="Random initial coefficients (stability)",
    )
    parser.add_argument(
        "--full-meshes",
        action="store_true",
        default=None,
        help="Use the full reference mesh lists when --cells is not given",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log progress to stderr")
    parser.add_argument("--log-file", type=str, default=None)
    parser.add_argument(
        "--dump-dir", default=None, help="run: write the assembled Gram matrices to this directory"
    )


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = CliArgumentParser(
        description="Central LDG solver for space-fractional diffusion on overlapping meshes."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    commands = {
        "run": "Solve once on the finest mesh of --cells and report the errors at T",
        "converge": "Errors and convergence rates over the mesh list",
        "stability": "Source-free run with its energy trace and monotonicity verdict",
    }
    for name, help_text in commands.items():
        _add_common_arguments(subparsers.add_parser(name, help=help_text))
    return parser.parse_args(argv)


def configure_logging(verbose: bool, log_file: str | None) -> None:
    """Attach stderr (and optional file) handlers to the package logger."""
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    stderr_handler = logging.StreamHandler(sys.stderr)
    stderr_handler.setLevel(logging.INFO if verbose else logging.WARNING)
    stderr_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(stderr_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Merge defaults, config file, FRACDIFF_* environment and flags.

    Raises:
        ConfigError: If any source is malformed.
    """
    file_values = load_config_file(args.config) if args.config else {}
    cli_values = normalize_config({key: getattr(args, key) for key in SETTING_FLAGS})
    return Settings.from_sources(cli_values, env_overrides(), file_values)


def _emit(text: str, out: str | None) -> None:
    if out:
        print(f"Report written to: {out}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def command_run(study: StudyConfig, settings: Settings) -> int:
    inv_h = study.cells[-1]
    operators: OperatorSet | None = None
    if settings.dump_dir:
        dimension = study.problem.dimension
        operators = build_operators(
            build_mesh(dimension, inv_h),
            BasisSpec(study.k, dimension),
            study.problem.alpha,
            study.problem.beta,
        )
        for path in dump_grams(operators, settings.dump_dir):
            print(f"Matrix written to: {path}", file=sys.stderr)
    try:
        result = run_single(
            study.problem,
            inv_h,
            study.k,
            study.step_coefficients,
            study.integrator,
            operators=operators,
        )
    except StabilityViolation as e:
        print(f"{COLORS.RED}Stability violation: {e}{COLORS.RESET}", file=sys.stderr)
        return CONSTANTS.EXIT_STABILITY_VIOLATION
    print(f"{study.problem.name}: 1/h={inv_h}, {result.state.steps} steps to T={result.state.t:g}")
    if result.e1 is not None and result.e2 is not None:
        print(f"E1={result.e1:.6e} E2={result.e2:.6e}")
    print(f"wall time {result.wall_time:.2f}s")
    return CONSTANTS.EXIT_OK


def command_converge(study: StudyConfig, settings: Settings) -> int:
    table = run_convergence(study)
    text = emit_report(table, settings.format, settings.out)
    if settings.out:
        print(format_table(table, color=sys.stdout.isatty()), end="")
    _emit(text, settings.out)
    if any(row.failure for row in table.rows):
        return CONSTANTS.EXIT_STABILITY_VIOLATION
    return CONSTANTS.EXIT_OK


def command_stability(study: StudyConfig, settings: Settings) -> int:
    report = run_stability(study)
    text = emit_stability_report(report, settings.format, settings.out)
    _emit(text, settings.out)
    if report.non_increasing:
        print(f"{COLORS.GREEN}Energy non-increasing{COLORS.RESET}", file=sys.stderr)
        return CONSTANTS.EXIT_OK
    detail = report.violation or f"max increment {report.max_increment:.3e}"
    print(f"{COLORS.RED}Energy increased: {detail}{COLORS.RESET}", file=sys.stderr)
    return CONSTANTS.EXIT_STABILITY_VIOLATION


def main(argv: list[str] | None = None) -> None:
    """Main entry point for the CLI."""
    args = parse_args(argv)

    try:
        settings = resolve_settings(args)
        configure_logging(args.verbose or settings.debug, settings.log_file)
        study = StudyConfig.from_settings(settings)
    except ConfigError as e:
        print(f"{COLORS.RED}Error: {e}{COLORS.RESET}", file=sys.stderr)
        sys.exit(CONSTANTS.EXIT_CONFIG_ERROR)

    try:
        if args.command == "run":
            code = command_run(study, settings)
        elif args.command == "converge":
            code = command_converge(study, settings)
        else:
            code = command_stability(study, settings)
    except ConfigError as e:
        print(f"{COLORS.RED}Error: {e}{COLORS.RESET}", file=sys.stderr)
        code = CONSTANTS.EXIT_CONFIG_ERROR
    except OSError as e:
        print(f"{COLORS.RED}Error writing report: {e}{COLORS.RESET}", file=sys.stderr)
        code = CONSTANTS.EXIT_CONFIG_ERROR
    sys.exit(code)


if __name__ == "__main__":
    main()
