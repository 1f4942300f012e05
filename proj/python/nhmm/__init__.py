"""Bayesian nonparametric non-homogeneous HMMs.

Exact MCMC (slice-sampled probit stick-breaking transitions) and
multi-step-ahead predictive density estimation.
"""

from ._nhmm import (
    ConfigError,
    DataError,
    FitResult,
    NumericalError,
    cmd_evaluate,
    cmd_fit,
    cmd_predict,
    cmd_replicate,
    cmd_simulate,
    fit,
    load_fit,
    predict,
    simulate,
)

__all__ = [
    "ConfigError",
    "DataError",
    "FitResult",
    "NumericalError",
    "cmd_evaluate",
    "cmd_fit",
    "cmd_predict",
    "cmd_replicate",
    "cmd_simulate",
    "fit",
    "load_fit",
    "predict",
    "simulate",
]
