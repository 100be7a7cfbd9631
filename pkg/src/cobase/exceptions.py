"""Exception hierarchy shared by all modules."""


class CobaseError(Exception):
    """Base class for all package errors."""


class ConfigError(CobaseError):
    """Invalid run configuration."""


class DataError(CobaseError):
    """Problem with input data."""


class FormatError(DataError):
    """A file does not follow the expected CSV schema."""


class StructuralError(DataError):
    """Data is well-formed but structurally inconsistent."""


class InsufficientDataError(DataError):
    """Not enough data to fit a model or build a reference structure."""


class InvariantViolation(CobaseError):
    """An internal audit failed."""
