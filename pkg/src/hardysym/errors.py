"""Exception hierarchy shared by all modules.

Each class maps onto one CLI exit code (see ``hardysym.cli``).
"""


class HardySymError(Exception):
    """Base class for all package errors."""


class ParameterError(HardySymError, ValueError):
    """Invalid dimensions, bounds, coefficients or configuration."""


class NonRealExponentError(ParameterError):
    """The indicial equation has no real roots."""


class ExtrapolationError(HardySymError, ValueError):
    """A map between grids was asked for values outside the source range."""


class ResolutionError(HardySymError, ValueError):
    """The target grid is too coarse to sample the requested quantity."""


class GridMismatchError(HardySymError, ValueError):
    """Fields or operators live on different grids."""


class ConvergenceError(HardySymError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    ``last`` carries the final iterate (or partial result) when available.
    """

    def __init__(self, message, last=None, trace=None):
        super().__init__(message)
        self.last = last
        self.trace = trace


class StalenessError(HardySymError, RuntimeError):
    """A solution was used as if converged but its residual is too large."""


class ShootingError(ConvergenceError):
    """No bracketing root found during a shooting scan."""


class SpectralError(HardySymError, RuntimeError):
    """The eigensolver failed; ``partial`` holds whatever converged."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
