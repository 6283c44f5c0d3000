"""
Exception hierarchy for the metric-learning bench.

Every error raised by the library derives from ``BenchError``.  The CLI maps
each family onto a process exit code (see ``cli.EXIT_CODES``):

    ConfigError / ParameterError            -> 2
    DataError (ingestion, shape)            -> 3
    numeric failures (degenerate, loss, ...) -> 4
"""


class BenchError(Exception):
    """Base class for all bench errors."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigError(BenchError, ValueError):
    """Invalid or unknown configuration key / value."""


class ParameterError(BenchError, ValueError):
    """A numeric parameter is outside its valid range."""


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

class DataError(BenchError, ValueError):
    """Base class for data-side failures."""


class ShapeError(DataError):
    """Vector / matrix dimensions do not agree."""


class IngestionError(DataError):
    """A feature file could not be ingested."""


class PayloadSizeError(IngestionError):
    """Binary payload size disagrees with the manifest."""


class NonFiniteFeatureError(IngestionError):
    """NaN or Inf found in an ingested feature matrix."""


class UnsupportedVersionError(IngestionError):
    """Manifest declares a format version this reader does not know."""


class CSVParseError(IngestionError):
    """Malformed CSV input; ``line`` is 1-based and includes the header."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


# ---------------------------------------------------------------------------
# Numerics
# ---------------------------------------------------------------------------

class DegenerateInputError(BenchError, ArithmeticError):
    """Zero-norm vector where a direction is required."""


class DegenerateOutputError(DegenerateInputError):
    """Projection head produced a zero vector before normalization."""


class DegenerateCentroidError(DegenerateInputError):
    """A class centroid has zero norm and cannot be re-normalized."""

    def __init__(self, message: str, class_id: int):
        super().__init__(message)
        self.class_id = class_id


class PreconditionError(BenchError, ValueError):
    """An operation's documented precondition does not hold."""


class ContractError(BenchError, RuntimeError):
    """Objects were combined in a way their contract forbids."""


class NumericError(BenchError, ArithmeticError):
    """Non-finite loss or gradient encountered during training."""


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

class LossError(BenchError, ValueError):
    """Batch does not satisfy a loss's structural requirements."""


class InsufficientPairsError(LossError):
    pass


class NoNegativesError(LossError):
    pass


class BatchStructureError(LossError):
    pass


class EmptyLossError(LossError):
    """Every loss unit was skipped; nothing to average."""


class UnknownClassError(LossError):
    """A batch label has no entry in the center bank."""
