"""Exception types raised by the extremals package."""

from typing import Optional


class ExtremalsError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ExtremalsError, ValueError):
    """A size, exponent, level or option is outside its allowed range."""


class UnsupportedExponentError(InvalidArgumentError):
    """The exponent p cannot be handled by the requested solver."""


class DegenerateInputError(InvalidArgumentError):
    """A field is identically zero or an integral that must be positive vanishes."""


class NoConvergenceError(ExtremalsError, RuntimeError):
    """An iterative linear solve hit its iteration cap."""

    def __init__(self, message: str, last_residual: float, iterations: Optional[int] = None):
        super().__init__(f"{message} (last relative residual {last_residual:.3e})")
        self.last_residual = last_residual
        self.iterations = iterations
