"""Diffusive search with stochastic resetting: eigenvalues, survival, Monte Carlo."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    DomainError,
    InsufficientSamplesError,
    PreAsymptoticError,
    ResetSearchError,
)

__all__ = [
    "__version__",
    "ResetSearchError",
    "DomainError",
    "ConvergenceError",
    "PreAsymptoticError",
    "InsufficientSamplesError",
]
