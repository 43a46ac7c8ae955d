"""Exception hierarchy shared by every harcnn module.

Each class maps to a distinct CLI exit code (see :mod:`harcnn.cli`).
"""


class HarError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ShapeError(HarError, ValueError):
    """Tensor shapes are invalid or do not line up."""

    exit_code = 4


class ConfigError(HarError, ValueError):
    """Unknown registry name or an inapplicable sensor/activity combination."""

    exit_code = 3


class DataError(HarError, ValueError):
    """Malformed or out-of-range input data."""

    exit_code = 4


class NumericError(HarError, ArithmeticError):
    """Non-finite values surfaced during training."""

    exit_code = 5


class FoldError(HarError):
    """A cross-validation fold failed; wraps the underlying error."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold} failed: {cause}")
        self.fold = fold
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
