"""Command line interface, study configuration and report writing."""

from .config import StudyConfig, build_prior, config_hash, load_config, normalized_dump, parse_config
from .io import read_draws, write_draws
from .study import run_case_study, run_simulation_study, write_report

__all__ = [
    "StudyConfig",
    "parse_config",
    "load_config",
    "normalized_dump",
    "config_hash",
    "build_prior",
    "run_simulation_study",
    "run_case_study",
    "write_report",
    "read_draws",
    "write_draws",
]
