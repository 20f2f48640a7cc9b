"""Exception hierarchy shared by the analytic and simulation layers."""


class SQFError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(SQFError, ValueError):
    """Invalid or unstable rate parameters."""


class CutError(SQFError, ValueError):
    """Evaluation requested on (or too close to) a branch cut."""


class PoleError(SQFError, ZeroDivisionError):
    """Evaluation requested at a pole of a rational factor."""


class ContinuationError(SQFError, ArithmeticError):
    """Root tracking along a path failed to keep the branch labels apart."""


class SeriesError(SQFError, ArithmeticError):
    """The iterated series did not converge or its orbit left the domain.

    ``diagnostics`` holds the orbit record (iterates and q-products) when
    available.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InversionError(SQFError, ArithmeticError):
    """Numerical Laplace inversion could not produce a trustworthy value."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SimulationError(SQFError, RuntimeError):
    """Invalid simulation configuration or precision target not met."""
