"""Monotonic, 1-norm Lipschitz-constrained dense networks in numpy."""

__version__ = "0.1.0"

from .constraints import Mode, NormScheme, Scheme, effective_weights, lipschitz_product, project_in_place
from .network import Activation, ConfigError, DenseLayer, MonotonicNetwork, NetworkSpec, forward_f, forward_g, group_sort, initialize
from .training import TrainConfig, backward, forward_with_tape, train
from .certify import Box, Certificate, abs_fit_experiment, certify, certify_lipschitz, certify_monotone

__all__ = [
    "Activation",
    "Box",
    "Certificate",
    "ConfigError",
    "DenseLayer",
    "Mode",
    "MonotonicNetwork",
    "NetworkSpec",
    "NormScheme",
    "Scheme",
    "TrainConfig",
    "abs_fit_experiment",
    "backward",
    "certify",
    "certify_lipschitz",
    "certify_monotone",
    "effective_weights",
    "forward_f",
    "forward_g",
    "forward_with_tape",
    "group_sort",
    "initialize",
    "lipschitz_product",
    "project_in_place",
    "train",
]
