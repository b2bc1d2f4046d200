"""Hamiltonian flows on the disc and the sphere, Hofer geometry and the Calabi invariant."""

__version__ = "0.1.0"

from . import geometry, hamiltonian, flow, algebra, hofer, calabi, limits  # noqa: E402,F401
from .errors import (HameoError, ConfigurationError, DomainError, ContractError, NormalizationError,  # noqa: E402,F401
                     IntegrationError, ConvergenceError, RangeError, EmptyFeasibleSetError)
