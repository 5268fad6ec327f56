"""Exception types raised by ckfdist."""


class CKFDistError(Exception):
    """Base class for all package errors."""


class DegenerateSegment(CKFDistError, ValueError):
    """A segment vector is too short to define a direction."""


class Infeasible(CKFDistError, ValueError):
    """A measured distance cannot be reached by any knee angle."""


class IllConditioned(CKFDistError, ValueError):
    """The knee-angle equation has (numerically) vanishing coefficients."""


class SingularInnovation(CKFDistError, ArithmeticError):
    """The innovation covariance of a measurement update is not invertible."""


class ConstraintSingular(CKFDistError, ArithmeticError):
    """The projected constraint covariance D P D^T is numerically singular."""


class InvalidPreset(CKFDistError, ValueError):
    """A motion preset is outside the reachable or admissible range."""


class LengthMismatch(CKFDistError, ValueError):
    """Two series that must be paired have different lengths."""


class DegenerateSeries(CKFDistError, ValueError):
    """A series has zero variance where a correlation is requested."""


class ZeroTruthPath(CKFDistError, ValueError):
    """The reference path has zero travelled distance."""


class VersionMismatch(CKFDistError, ValueError):
    """A file declares an unsupported format version."""


class SchemaError(CKFDistError, ValueError):
    """A file does not follow the expected layout."""


class FilterStepError(CKFDistError, RuntimeError):
    """A filter step failed; `frame` is the index of the offending sample."""

    def __init__(self, frame: int, cause: BaseException):
        super().__init__(f"frame {frame}: {type(cause).__name__}: {cause}")
        self.frame = frame
        self.cause = cause
