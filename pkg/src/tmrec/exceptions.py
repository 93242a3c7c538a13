"""Error types raised across the package."""


class TmrecError(Exception):
    """Base class for all package errors."""


class DimensionError(TmrecError, ValueError):
    """Input width does not match the model or schema."""


class RangeError(TmrecError, ValueError):
    """Index or parameter outside its valid range."""


class ConfigError(TmrecError, ValueError):
    """Inconsistent or invalid configuration."""


class DataError(TmrecError, ValueError):
    """Unusable input data (empty, unparseable, ...)."""


class SchemaError(DataError):
    """Input table is missing required columns."""


class IntegrityError(DataError):
    """Referential integrity violation between tables."""


class EncodingError(TmrecError, ValueError):
    """Value cannot be encoded under the feature schema."""


class FormatError(TmrecError, ValueError):
    """Malformed or version-incompatible serialized artifact."""


class ArtifactError(TmrecError, ValueError):
    """On-disk artifacts are incompatible (e.g. schema hash mismatch)."""


class MetricError(TmrecError, ValueError):
    """Metric is undefined for the given inputs."""


class DivergenceError(TmrecError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class BackendUnavailable(TmrecError, ImportError):
    """Requested compute backend is not importable."""
