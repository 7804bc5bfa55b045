"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid arguments, shapes or configuration values."""


class NumericError(ArithmeticError):
    """A computation hit a degenerate numerical case (zero spread, no data)."""
