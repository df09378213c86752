"""Shared exception types."""


class FormatError(ValueError):
    """Malformed input file (bad header, bad line, inconsistent dimensions)."""


class DivergenceError(RuntimeError):
    """Iterative optimization diverged or produced non-finite values."""
