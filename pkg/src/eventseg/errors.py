"""Exception types shared across the package.

Every error carries a short machine-parsable ``category`` string; the
command-line front end prints it on failure and maps it to an exit code.
"""


class EventSegError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class ShapeError(EventSegError):
    """Tensor shapes, dimensions, or indices do not fit an operation."""

    category = "shape"


class ConfigError(EventSegError):
    """A configuration value violates its contract."""

    category = "config"


class NumericsError(EventSegError):
    """A non-finite value appeared where only finite values are allowed."""

    category = "numerics"


class DataError(EventSegError):
    """Input data (files, annotations, corpora) violates its schema."""

    category = "data"


class FormatError(EventSegError):
    """A binary blob does not conform to its wire format."""

    category = "format"


class BadMagicError(FormatError):
    category = "format.magic"


class VersionError(FormatError):
    category = "format.version"


class TruncatedError(FormatError):
    category = "format.truncated"
