"""Exception types shared across the package."""


class ResetSearchError(Exception):
    """Base class for all package errors."""

    category = "error"


class DomainError(ResetSearchError, ValueError):
    """An argument lies outside the domain of the operation."""

    category = "domain"


class ConvergenceError(ResetSearchError, RuntimeError):
    """An iterative solver or quadrature failed to reach its tolerance."""

    category = "convergence"


class PreAsymptoticError(ResetSearchError, RuntimeError):
    """The requested asymptotic object does not exist yet at this time scale."""

    category = "pre-asymptotic"


class InsufficientSamplesError(ResetSearchError, RuntimeError):
    """Too few Monte Carlo samples survive to form a conditional estimate."""

    category = "insufficient-samples"
