"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: configuration problems exit with 2,
data/format problems with 3, numeric failures during inference with 4.
"""


class HrTrackError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(HrTrackError):
    """Invalid or inconsistent configuration (bad flag, missing key, ...)."""

    exit_code = 2


class ParameterError(ConfigError):
    """A function argument is outside its documented domain."""


class DataError(HrTrackError):
    """Problem with user-supplied data (files, labels, signals)."""

    exit_code = 3


class FormatError(DataError):
    """Malformed file content; message carries the offending line."""


class ValidationError(DataError):
    """Structurally valid input violating a documented invariant."""


class RangeError(DataError):
    """A value falls outside the heart-rate grid."""


class InsufficientDataError(DataError):
    """Not enough data to carry out the requested computation."""


class DomainError(DataError):
    """Mathematically undefined request (log of non-positive HR, /0, ...)."""


class NumericError(HrTrackError):
    """Numeric failure during inference."""

    exit_code = 4


class BeliefCollapseError(NumericError):
    """Filter normalizer underflowed: evidence and prediction are disjoint."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DecodeFailureError(NumericError):
    """Every decoding path reached probability zero."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
