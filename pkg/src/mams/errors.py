"""Exception hierarchy shared across the package."""


class MamsError(Exception):
    """Base class for all package errors."""


class StructuralError(MamsError):
    """A chain violates a structural requirement (validation or irreducibility)."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = tuple(violations)


class NumericalError(MamsError):
    """A linear solve failed or left residuals above tolerance."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class DomainError(MamsError):
    """Inputs are outside the domain of an operation."""


class InstabilityError(DomainError):
    """The offered load is at or above capacity (lambda >= mu)."""


class ConfigError(MamsError):
    """Invalid simulation configuration."""


class SpecError(MamsError):
    """A system spec document failed to parse or validate."""


class OracleBudgetError(MamsError):
    """Transient oracle exhausted its step budget before reaching target accuracy.

    Carries the partial estimate and a bound on the remaining truncation error.
    """

    def __init__(self, message, partial, error_bound):
        super().__init__(message)
        self.partial = partial
        self.error_bound = error_bound


class EstimationError(MamsError):
    """A simulation-based estimator could not be formed."""


class SelfCheckError(MamsError):
    """A redundant internal consistency check failed."""
