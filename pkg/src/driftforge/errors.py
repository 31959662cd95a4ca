"""Exception hierarchy shared across the pipeline.

CLI exit-code mapping: ValidationError/ConfigError/ParseError -> 1,
I/O failures (OSError) -> 2.
"""


class DriftforgeError(Exception):
    """Base class for all pipeline errors."""


class ParseError(DriftforgeError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(DriftforgeError):
    """Input violates a documented invariant (duplicate id, unknown label, ...)."""


class ConfigError(DriftforgeError):
    """Bad configuration value or missing required column/key."""


class InsufficientDataError(DriftforgeError):
    """Operation needs more samples than were supplied."""


class NumericError(DriftforgeError):
    """Numerical failure (e.g. covariance not factorizable after shrinkage)."""


class DimensionMismatchError(DriftforgeError):
    """Vector/matrix dimensions do not agree."""


class UndefinedSimilarityError(DriftforgeError):
    """Cosine similarity requested for a zero vector."""


class TrainerError(DriftforgeError):
    """Trainer bridge failed or returned a malformed reply."""
