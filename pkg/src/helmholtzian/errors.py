"""Exception hierarchy shared by all modules."""


class HelmholtzianError(Exception):
    """Base class for errors raised by this package."""


class InputError(HelmholtzianError, ValueError):
    """A caller-supplied value violates an operation's preconditions."""


class ConsistencyError(HelmholtzianError, RuntimeError):
    """An internal invariant was broken (e.g. a triangle without its edges)."""


class ConvergenceError(HelmholtzianError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    ``residuals`` carries the best residual(s) reached so callers can decide
    whether the partial answer is usable.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class FormatError(InputError):
    """A data file could not be parsed into the expected table."""
