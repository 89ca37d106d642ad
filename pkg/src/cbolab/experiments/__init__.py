"""Experiment harness: config parsing, replicate sweeps, outputs and the CLI."""

from .config import ExperimentConfig, load_config
from .runner import ExperimentResult, run_experiment

__all__ = ["ExperimentConfig", "ExperimentResult", "load_config", "run_experiment"]
