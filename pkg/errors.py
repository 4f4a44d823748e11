"""
Error taxonomy for the palsy detection toolkit.

Every error carries a short ``category`` string. The command-line entry point
prints it as ``error[<category>]: <message>`` so failures stay machine-parsable.
"""


class PalsyError(Exception):
    """Base class for all toolkit errors."""

    category = "error"

    def one_line(self) -> str:
        """Render the error as a single stderr line."""
        message = " ".join(str(self).split())
        return f"error[{self.category}]: {message}"


class DimensionError(PalsyError, ValueError):
    """Tensor shapes do not conform."""

    category = "dimension"


class ShapeError(DimensionError):
    """Output dimensions of an operation are not integral."""

    category = "shape"


class ParameterError(PalsyError, ValueError):
    """A hyperparameter or layer parameter is out of range."""

    category = "parameter"


class BatchSizeError(PalsyError, ValueError):
    """Batch too small for the requested operation."""

    category = "batch_size"


class LabelError(PalsyError, ValueError):
    """Targets outside the {0, 1} label set."""

    category = "label"


class NumericError(PalsyError, ArithmeticError):
    """A computation produced non-finite values."""

    category = "numeric"


class SubsetSpecError(PalsyError, ValueError):
    """Landmark subset index list is malformed."""

    category = "subset_spec"


class ContourSpecError(PalsyError, ValueError):
    """Contour specification is malformed."""

    category = "contour_spec"


class InputError(PalsyError, ValueError):
    """Input data is unusable (empty image, mismatched lengths)."""

    category = "input"


class IngestionError(PalsyError, ValueError):
    """Manifest or per-frame files failed validation."""

    category = "ingestion"


class ProtocolError(PalsyError, ValueError):
    """Evaluation protocol preconditions are violated."""

    category = "protocol"


class ConfigError(PalsyError, ValueError):
    """Model or run configuration is invalid."""

    category = "config"


class TapError(PalsyError, KeyError):
    """Unknown embedding tap."""

    category = "tap"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class OutputError(PalsyError):
    """An output file could not be written."""

    category = "output"


class ReportParseError(PalsyError, ValueError):
    """A report file could not be parsed."""

    category = "parse"


class UsageError(PalsyError, ValueError):
    """Command-line usage error."""

    category = "usage"


class CacheMissingError(PalsyError):
    """Preprocessed modality cache is absent."""

    category = "cache"
