"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class MethodError(RuntimeError):
    """A numerical method is not applicable to the given input."""


class ResolutionError(ValueError):
    """A smoothing parameter is too small for the time discretization."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to meet its tolerance.

    The best available estimate and an error indicator are attached so that
    callers can decide whether the partial result is still usable.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
