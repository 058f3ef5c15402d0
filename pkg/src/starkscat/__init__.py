"""Numerical toolkit for the short-range perturbed Stark Hamiltonian.

Submodules: :mod:`cutoffs`, :mod:`parabolic`, :mod:`classical`,
:mod:`transport`, :mod:`oscillatory`, :mod:`born_kernel`, :mod:`cli`.
"""

from .config import ExperimentConfig, make_rng
from .errors import (AccuracyError, ConfigError, ConstructionError, DivergenceError,
                     DomainError, IntegrationError, StarkError)
from .potentials import PotentialModel, coulomb, from_spec, gaussian, power_law, zero

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "ConfigError", "ConstructionError", "DivergenceError", "DomainError",
    "ExperimentConfig", "IntegrationError", "PotentialModel", "StarkError", "coulomb",
    "from_spec", "gaussian", "make_rng", "power_law", "zero",
]
