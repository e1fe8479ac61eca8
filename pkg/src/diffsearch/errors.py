"""Exception types shared across the package.

Validation errors carry the name of the offending field so callers (and the
CLI) can point at the exact input that was rejected; numeric errors carry
enough context to diagnose the failure without re-running.
"""

from __future__ import annotations


class DiffSearchError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(DiffSearchError, ValueError):
    """A model parameter failed validation."""

    def __init__(self, field: str, value, message: str):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}: {message}")


class NonPositiveMu(ParameterError):
    """Relaunch rate must be strictly positive."""

    def __init__(self, value):
        super().__init__("relaunch_rate", value, "relaunch rate must be > 0")


class NegativeRate(ParameterError):
    """A rate (loss or timeout) was negative."""

    def __init__(self, field: str, value):
        super().__init__(field, value, "rates must be >= 0")


class NegativeDistance(ParameterError):
    def __init__(self, value):
        super().__init__("distance", value, "starting distance must be >= 0")


class NegativeDiffusion(ParameterError):
    def __init__(self, value):
        super().__init__("diffusion", value, "diffusion coefficient must be >= 0")


class InvalidRace(ParameterError):
    """Race specification (searcher count / success quorum) is inconsistent."""


class ExponentOverflow(DiffSearchError, ArithmeticError):
    """A closed-form result would overflow a float; the exponent is reported.

    Raised instead of silently returning inf so sweeps can distinguish
    "astronomically large but finite" from a genuine divergence.
    """

    def __init__(self, exponent: float):
        self.exponent = exponent
        super().__init__(
            f"result ~ exp({exponent:.6g}) exceeds double-precision range"
        )


class DegenerateCurtailment(DiffSearchError, ZeroDivisionError):
    """No loss, no timeout and no race attraction: attempts are never cut short.

    The renewal formulas divide by (loss + timeout + attraction) and are
    undefined in this regime; callers should consult the finiteness
    classifier instead.
    """


class NoConvergence(DiffSearchError, ArithmeticError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, iterations: int | None = None,
                 residual: float | None = None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(message)


class InversionUnstable(DiffSearchError, ArithmeticError):
    """Numerical Laplace inversion oscillated beyond the accepted tolerance."""

    def __init__(self, worst_violation: float, message: str = ""):
        self.worst_violation = worst_violation
        super().__init__(
            message or f"inverted transform oscillates by {worst_violation:.3g}"
        )


class DensityVanishes(DiffSearchError, ArithmeticError):
    """Search-time density is numerically zero where a quantile CLT needs it."""


class UnreachableDeadline(DiffSearchError, ValueError):
    """Success probability by the deadline is numerically zero.

    No finite number of searchers gives a useful quorum estimate.
    """


class IllConditioned(DiffSearchError, ArithmeticError):
    """Layered-medium linear system too ill-conditioned to trust."""
