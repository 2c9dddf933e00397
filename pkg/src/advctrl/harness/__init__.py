"""Experiment harness: config parsing, seeded runs, CSV reports."""

from .config import (
    ConfigError,
    ExperimentConfig,
    VALID_KINDS,
    load_experiment_config,
    parse_config_text,
)
from .runner import ExperimentOutcome, run_experiment

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "VALID_KINDS",
    "load_experiment_config",
    "parse_config_text",
    "ExperimentOutcome",
    "run_experiment",
]
