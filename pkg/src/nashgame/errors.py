"""Exception types shared across the package."""


class NashGameError(Exception):
    """Base class for all package errors."""


class InvalidInputError(NashGameError, ValueError):
    """An argument violates a documented precondition."""


class InfiniteDivergenceError(NashGameError, ValueError):
    """KL divergence is infinite (mass where the reference has none)."""


class ConvergenceError(NashGameError, RuntimeError):
    """An iterative solve exhausted its budget above tolerance."""

    def __init__(self, message: str, best_residual: float, iterations: int):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


class NumericBlowupError(NashGameError, ArithmeticError):
    """Iterates left the representable range (non-finite or huge logits)."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(NashGameError, ValueError):
    """An experiment config failed validation; names the offending field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class PlotError(NashGameError, ValueError):
    """Nothing plottable in the supplied records."""
