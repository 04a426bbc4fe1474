"""Exception types shared across the package."""


class CrowError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(CrowError):
    """A binary file does not conform to its interchange format."""


class TruncationError(FormatError):
    """Declared sizes in a header disagree with the bytes actually present."""


class DataError(CrowError):
    """Input values violate a documented precondition (NaN, negatives, ...)."""


class DimensionError(CrowError):
    """Shapes of two inputs that must agree do not."""


class ParameterError(CrowError):
    """A configuration parameter is out of its valid range."""


class GroundTruthError(CrowError):
    """A ground-truth directory or file cannot be parsed."""
