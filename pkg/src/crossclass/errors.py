"""Exception hierarchy shared by all modules."""


class CrossClassError(Exception):
    """Base class for every error raised by this package."""


class InvariantViolation(CrossClassError, ValueError):
    pass


class ShapeMismatch(CrossClassError, ValueError):
    pass


class VolFormatError(CrossClassError):
    """A VOL1 file could not be decoded."""


class BadMagic(VolFormatError):
    pass


class TruncatedFile(VolFormatError):
    pass


class UnsupportedDtype(VolFormatError):
    pass


class DimsOverflow(VolFormatError):
    pass


class ConfigError(CrossClassError, ValueError):
    pass


class ConfigInfeasible(ConfigError):
    pass


class CapacityExceeded(CrossClassError, ValueError):
    pass


class LabelOutOfRange(CrossClassError, ValueError):
    pass


class MissingDigit(CrossClassError, ValueError):
    pass


class MissingGroundTruth(CrossClassError, ValueError):
    pass


class EmptyTable(CrossClassError, ValueError):
    pass


class RhoZero(CrossClassError, ValueError):
    pass


class PipelineError(CrossClassError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
