class HemsError(Exception):
    pass


class ValidationError(HemsError, ValueError):
    """Bad input data, configuration or call sequence (CLI exit code 2)."""


class NumericalError(HemsError, ArithmeticError):
    """Non-finite loss, gradient or Q-value during training (CLI exit code 3)."""
