"""Particle laboratory for consensus-based optimization (CBO).

The package simulates the CBO interacting particle system, builds the
synchronous couplings used to measure mean-field and stability errors,
evaluates every closed-form constant of the underlying theory, and ships a
CLI (``cbo``) that runs the headline experiments and writes CSV, JSON and
figure outputs.
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, FitError, InputError, NumericError, PreconditionError
from .dynamics import (
    CboParams,
    Ensemble,
    NoiseKind,
    RngStream,
    brownian_increments,
    consensus_point,
    em_step,
    mean_point,
    noise_factor,
    simulate,
)
from .laws import InitialLaw, sample_initial

__all__ = [
    "CboParams",
    "ConfigurationError",
    "Ensemble",
    "FitError",
    "InitialLaw",
    "InputError",
    "NoiseKind",
    "NumericError",
    "PreconditionError",
    "RngStream",
    "brownian_increments",
    "consensus_point",
    "em_step",
    "mean_point",
    "noise_factor",
    "sample_initial",
    "simulate",
    "__version__",
]
