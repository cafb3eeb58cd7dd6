"""Exception types shared across the package."""


class CppnetError(Exception):
    """Base class for all package-specific errors."""


class InvalidDensity(CppnetError, ValueError):
    """Obstacle density outside the supported [0, 0.5] range."""


class ConnectivityFailure(CppnetError, RuntimeError):
    """No connected free-cell layout found within the retry bound."""


class ParseError(CppnetError, ValueError):
    """Malformed or truncated input file."""


class FormatVersionMismatch(ParseError):
    """File carries an unknown format header or version."""


class CapacityExceeded(CppnetError, ValueError):
    """More free cells than graph slots."""


class OutOfRange(CppnetError, IndexError):
    """Node slot beyond the real-node range."""


class TooLarge(CppnetError, ValueError):
    """Instance too big for exhaustive search."""


class ShapeMismatch(CppnetError, ValueError):
    """Tensor shapes inconsistent with the model configuration."""


class NonFiniteActivation(CppnetError, FloatingPointError):
    """NaN or inf appeared in a training-mode forward pass."""


class DegenerateBatch(CppnetError, ValueError):
    """Batch with only one label class; the weighted loss is undefined."""


class EmptyEvalSet(CppnetError, ValueError):
    """Metrics requested over zero scenarios."""


class EmptyRecords(CppnetError, ValueError):
    """Summary statistics requested over zero records."""


class CheckpointWriteFailure(CppnetError, OSError):
    """Checkpoint could not be written."""
