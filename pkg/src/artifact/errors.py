"""Exception hierarchy shared by the regression and complexity halves."""


class ArtifactError(Exception):
    """Base class for all library errors."""


class ValidationError(ArtifactError, ValueError):
    """A parameter violates the precondition of the requested operation."""


class InvalidLadder(ValidationError):
    pass


class InsufficientSupport(ValidationError):
    pass


class SingularMatrix(ArtifactError):
    pass


class SingularInformation(SingularMatrix):
    pass


class SingularJointCovariance(SingularMatrix):
    pass


class AssumptionViolated(ArtifactError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidMu(ValidationError):
    pass


class CalibrationDiverged(ArtifactError):
    pass


class SMBViolatedAtFirstScale(ArtifactError):
    pass


class UnknownField(ValidationError):
    pass


class UnknownScenario(ValidationError):
    pass


class TruncationTooCoarse(ArtifactError):
    pass


class DegenerateSpectrum(ArtifactError):
    pass


class BudgetExceeded(ArtifactError):
    """Enumeration hit the node cap.

    ``lower`` and ``upper`` bracket the exact count; ``upper`` is ``None``
    when no feasible threshold was reached before the cap.
    """

    def __init__(self, message, lower=1, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class ParseError(ArtifactError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
