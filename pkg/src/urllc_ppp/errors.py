"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedRegimeError(DomainError):
    """The requested formula does not apply to the given parameters."""


class UsageError(ValueError):
    """Inconsistent combination of inputs (e.g. a batch paired with the wrong parameters)."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge.

    Carries the best available estimate and its error bound so callers can
    decide whether to accept it.
    """

    def __init__(self, message, estimate=float("nan"), error_bound=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound
