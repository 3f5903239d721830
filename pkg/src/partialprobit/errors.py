"""Exception types shared across the package."""


class PartialProbitError(Exception):
    """Base class for all package errors."""


class DomainError(PartialProbitError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class DataError(PartialProbitError, ValueError):
    """Input data violates the documented schema or an invariant."""


class SpecError(PartialProbitError, ValueError):
    """A covariate specification is invalid (unknown name, failed exclusion restriction, ...)."""


class NumericalError(PartialProbitError, RuntimeError):
    """A numerical procedure failed in a way that cannot be reported as a status."""
