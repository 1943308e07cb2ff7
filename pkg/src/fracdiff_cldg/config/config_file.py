"""Load and parse JSON study configuration files and environment overrides."""

import json
import logging
import os
from collections.abc import Mapping
from typing import Any, Callable

from fracdiff_cldg.config.constants import CONSTANTS

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised for missing, unreadable or malformed configuration."""


def parse_cells(value: Any) -> tuple[int, ...]:
    """Parse a mesh list given as "8,16,32" or as a JSON list.

    Args:
        value: Comma-separated string or sequence of integers.

    Returns:
        Tuple of 1/h values.
    """
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"cells must be a list or comma-separated string, got {value!r}")
    try:
        return tuple(int(p) for p in parts)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid cells value {value!r}: {e}") from e


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


# Settings key -> converter. Keys double as config-file keys and, upper-cased
# with the FRACDIFF_ prefix, as environment variable names.
SETTING_CONVERTERS: dict[str, Callable[[Any], Any]] = {
    "problem": str,
    "dimension": int,
    "alpha": float,
    "beta": float,
    "k": int,
    "cells": parse_cells,
    "t_final": float,
    "tau_max_coeff": float,
    "tau_coeff": float,
    "integrator": str,
    "out": str,
    "format": str,
    "workers": int,
    "seed": int,
    "random_initial": _parse_bool,
    "full_meshes": _parse_bool,
    "log_file": str,
    "dump_dir": str,
}

# Keys that describe the problem itself rather than the run
PROBLEM_KEYS: tuple[str, ...] = ("d", "d1", "d2", "g", "f", "exact")

# Aliases accepted in config files
KEY_ALIASES: dict[str, str] = {"T": "t_final", "tmax_final": "t_final"}

# Environment names that differ from the upper-cased key
ENV_NAMES: dict[str, str] = {"t_final": "TMAX_FINAL"}


def load_config_file(config_path: str) -> dict[str, Any]:
    """Load a JSON key-value configuration file.

    Args:
        config_path: Path to the configuration file.

    Returns:
        Normalized configuration dictionary (aliases resolved, values converted).

    Raises:
        ConfigError: If the file is missing, unreadable, not a JSON object or
            contains a value that cannot be converted.
    """
    if not os.path.isfile(config_path):
        raise ConfigError(f"Config file not found: {config_path}")

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {config_path}: {e}") from e
    except OSError as e:
        raise ConfigError(f"Could not read {config_path}: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"{config_path} must contain a JSON object")

    logger.info(f"Loaded config file {config_path} with keys {sorted(raw)}")
    return normalize_config(raw)


def normalize_config(raw: Mapping[str, Any]) -> dict[str, Any]:
    """Resolve key aliases and convert known setting values.

    Unknown keys are dropped with a warning; problem keys are kept verbatim.
    """
    config: dict[str, Any] = {}
    for key, value in raw.items():
        key = KEY_ALIASES.get(key, key)
        if key in PROBLEM_KEYS:
            config[key] = value
        elif key in SETTING_CONVERTERS:
            if value is None:
                continue
            try:
                config[key] = SETTING_CONVERTERS[key](value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Invalid value for {key!r}: {value!r} ({e})") from e
        else:
            logger.warning(f"Ignoring unknown config key {key!r}")
    return config


def env_var_name(key: str) -> str:
    """Return the environment variable overriding a settings key."""
    return CONSTANTS.ENV_PREFIX + ENV_NAMES.get(key, key.upper())


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Collect FRACDIFF_* overrides from the environment.

    Args:
        environ: Environment mapping (defaults to os.environ).

    Returns:
        Converted values keyed by settings key.
    """
    environ = os.environ if environ is None else environ
    overrides: dict[str, Any] = {}
    for key, convert in SETTING_CONVERTERS.items():
        name = env_var_name(key)
        if name in environ and environ[name] != "":
            try:
                overrides[key] = convert(environ[name])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"Invalid value in {name}: {environ[name]!r} ({e})") from e
    return overrides
