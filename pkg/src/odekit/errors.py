"""Exception types shared across odekit."""

from __future__ import annotations


class OdekitError(Exception):
    """Base class for all odekit errors."""


class NonFiniteState(OdekitError, FloatingPointError):
    """A solver stage or step produced NaN/Inf."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class NonFiniteGradient(OdekitError, FloatingPointError):
    """An optimizer received a gradient containing NaN/Inf."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class NoConvergence(OdekitError):
    """Iteration budget exhausted before reaching the tolerance.

    The best iterate seen is attached so callers can still use it.
    """

    def __init__(self, message: str, x=None, iters: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.x = x
        self.iters = iters
        self.residual = residual


class SingularUpdate(OdekitError):
    """The quasi-Newton linear system could not be solved."""


class TimeMismatch(OdekitError, ValueError):
    """An observation time does not lie on the solver grid."""


class GridTooSmall(OdekitError, ValueError):
    """The requested grid cannot hold the seeded initial region."""


class ConfigError(OdekitError, ValueError):
    """A run configuration failed validation.

    Attributes:
        field: dotted path of the offending field (``"grid.n_steps"``).
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
