class DataError(ValueError):
    """Malformed or inconsistent observations."""


class SingularityError(ArithmeticError):
    """A likelihood term or derivative has a vanishing denominator."""


class DegenerateError(ValueError):
    """The input carries no information for the requested quantity."""


class NonConvergenceError(RuntimeError):
    """An iteration hit its cap; carries the last iterate for inspection."""

    def __init__(self, message, *, last=None, residual=None, report=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
        self.report = report


class BaselineError(ArithmeticError):
    """Fixed-point factor turned negative: the baseline is not the gamma-minimizer."""
