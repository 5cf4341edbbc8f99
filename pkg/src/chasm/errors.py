"""Shared exception types."""


class NumericsError(RuntimeError):
    """A numerical routine failed beyond the configured safeguards."""
