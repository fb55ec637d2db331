"""Exception hierarchy shared by all modules."""


class FinslerError(Exception):
    """Base class for errors raised by this package."""


class DomainError(FinslerError, ValueError):
    """A point lies outside the admissible domain of a field."""


class CapabilityError(FinslerError):
    """A request exceeds a documented engine limit (e.g. derivative order)."""


class SingularityError(FinslerError, ArithmeticError):
    """The fundamental tensor is degenerate at the requested point."""

    def __init__(self, message, det=None):
        super().__init__(message)
        self.det = det


class ConfigurationError(FinslerError, ValueError):
    """Invalid or inconsistent configuration."""


class IntegrationError(FinslerError, RuntimeError):
    """Adaptive integration failed; ``partial`` holds the states reached so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
