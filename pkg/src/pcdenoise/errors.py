"""Shared exception types."""


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class Diverged(RuntimeError):
    """Raised when an iteration produces non-finite values (NaN/inf)."""
