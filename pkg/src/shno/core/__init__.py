"""Core functionality: process settings and the run-config file grammar."""

from shno.core.config import Settings, find_dotenv
from shno.core.parser import ConfigFileParser, load_run_config, parse_run_config

__all__ = [
    "ConfigFileParser",
    "Settings",
    "find_dotenv",
    "load_run_config",
    "parse_run_config",
]
