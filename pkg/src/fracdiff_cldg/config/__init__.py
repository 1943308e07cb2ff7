"""Configuration module for the fractional diffusion solver."""

from fracdiff_cldg.config.config_file import ConfigError
from fracdiff_cldg.config.constants import Colors, Constants
from fracdiff_cldg.config.settings import Settings

__all__ = ["Colors", "ConfigError", "Constants", "Settings"]
