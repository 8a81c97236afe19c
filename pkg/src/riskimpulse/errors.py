"""Semantic exception types shared across the package."""


class RiskImpulseError(Exception):
    """Base class for all package errors."""


class DomainError(RiskImpulseError, ValueError):
    """Inputs violate an operation's contract (shape, range, alignment)."""


class NumericalError(RiskImpulseError, ArithmeticError):
    """A computation produced or encountered non-finite values.

    Carries optional context (e.g. state / replication indices) so failures
    inside long Monte Carlo loops can be located.
    """

    def __init__(self, message, **context):
        if context:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(context.items()))
            message = f"{message} ({detail})"
        super().__init__(message)
        self.context = context


class ConvergenceError(RiskImpulseError, RuntimeError):
    """Fixed-point iteration failed to reach tolerance within max_iter."""

    def __init__(self, message, last_residual=None, iterations=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.iterations = iterations
