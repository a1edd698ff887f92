"""Exception types shared across the package."""

from __future__ import annotations


class TorichkError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(TorichkError, ValueError):
    """Matrix dimensions disagree with the declared (n, d)."""


class InvalidSpec(TorichkError, ValueError):
    """The subtorus matrix violates primitivity or rank."""


class SigmaZero(TorichkError, ValueError):
    """The direction vector a is identically zero."""


class NotTransversal(TorichkError, ValueError):
    """The one-parameter subgroup lies inside the quotient torus N."""


class PreconditionFailed(TorichkError, ValueError):
    """An operation was called on data violating its precondition."""


class ExhaustedAttempts(TorichkError, RuntimeError):
    """The generic level sampler ran out of retries."""


class UnsupportedNumberField(TorichkError, ValueError):
    """Slope entries do not lie in a single quadratic field."""


class SingularJacobian(TorichkError, ArithmeticError):
    """The moment map Jacobian dropped rank."""


class NoConvergence(TorichkError, ArithmeticError):
    """Newton iteration hit its iteration budget."""


class DegenerateOrbit(TorichkError, ArithmeticError):
    """An orbit direction vanishes, so the quotient chart is invalid."""


class DimensionMismatch(TorichkError, ValueError):
    """A closed-form oracle was called outside its dimension range."""


class StepTooLarge(TorichkError, ArithmeticError):
    """Richardson levels disagree beyond the configured factor."""
