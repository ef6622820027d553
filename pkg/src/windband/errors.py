"""Exception hierarchy shared by all windband modules.

Every failure mode raised by the library derives from ``WindbandError`` so
callers (and the CLI exit-code mapping) can distinguish configuration
problems, bad input data, and numeric divergence.
"""


class WindbandError(Exception):
    """Base class for all windband errors."""


class ConfigInvalidError(WindbandError):
    """A run configuration failed validation."""


class DataError(WindbandError):
    """Base class for malformed or unusable input data."""


class MissingValueError(DataError):
    """A cell in the input is empty or NaN."""


class NonMonotonicTimeError(DataError):
    """Timestamps are not strictly increasing at a constant step."""


class SchemaMismatchError(DataError):
    """A file header or layout does not match the expected schema."""


class EmptySplitError(DataError):
    """A train/test split left one side too short to window."""


class DegenerateRangeError(DataError):
    """Normalization range has max equal to min."""


class TooShortError(DataError):
    """Series is too short for the requested window length."""


class LengthMismatchError(DataError):
    """Two aligned sequences have different lengths."""


class ZeroVarianceError(DataError):
    """A series is constant, so correlation is undefined."""


class NegativeWidthError(DataError):
    """Interval widths must be non-negative."""


class NotPositiveDefiniteError(DataError):
    """Target correlation matrix is not symmetric positive-definite."""


class OutOfRangeError(DataError):
    """An index window falls outside the series."""


class EmptyDatasetError(DataError):
    """A windowed dataset contains no windows."""


class EmptyBatchError(DataError):
    """A training batch contains no windows."""


class EmptyWindowError(DataError):
    """A feature window contains no steps."""


class TooFewSamplesError(DataError):
    """Monte-Carlo estimation needs at least two samples."""


class UpstreamMissingError(DataError):
    """A pipeline stage was invoked before its inputs exist."""


class NumericError(WindbandError):
    """Base class for numeric-contract violations."""


class ShapeMismatchError(NumericError):
    """Operand shapes are incompatible."""


class NonPositiveSigmaError(NumericError):
    """A Gaussian standard deviation must be strictly positive."""


class InvalidPriorError(NumericError):
    """Mixture prior parameters are out of range."""


class CacheMismatchError(NumericError):
    """Backward pass received caches from a different forward pass."""


class DivergedLossError(NumericError):
    """Training loss became non-finite."""
