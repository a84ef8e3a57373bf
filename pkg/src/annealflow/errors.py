"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad input or configuration (CLI exit code 2)."""


class NumericalError(ArithmeticError):
    """A computation produced a non-finite value (CLI exit code 3)."""
