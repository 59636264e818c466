"""Exception types raised across the package."""


class AsvsError(Exception):
    """Base class for package errors."""


class DimensionError(AsvsError, ValueError):
    pass


class ConfigurationError(AsvsError, ValueError):
    pass


class VocabularyError(AsvsError, IndexError):
    pass


class AlignmentError(AsvsError, ValueError):
    pass


class ValidationError(AsvsError, ValueError):
    pass


class InvariantViolation(AsvsError, RuntimeError):
    pass
