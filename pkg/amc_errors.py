"""Error taxonomy for the modulation classification toolkit.

Every error carries the process exit code the command line maps it to:
1 for argument/configuration problems, 2 for data or format problems and
3 when the SMO solver fails to converge.
"""

from typing import Optional

EXIT_OK = 0
EXIT_ARGUMENT = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3


class AmcError(Exception):
    """Base class for all toolkit errors."""

    exit_code = EXIT_DATA


class ConfigurationError(AmcError):
    """A configuration value violates one of its invariants."""

    exit_code = EXIT_ARGUMENT

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        message = f"configuration invariant violated: {invariant}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ShapeError(AmcError):
    """Input sequences have the wrong length or are empty."""


class DimensionMismatchError(AmcError):
    """Vectors that must share a dimension do not."""


class DegenerateSignalError(AmcError):
    """A waveform has zero power where power is required."""


class EmptyMaskError(AmcError):
    """The amplitude threshold selects no samples."""

    def __init__(self, threshold: float):
        self.threshold = threshold
        super().__init__(f"amplitude threshold At={threshold!r} selects no samples (Nc = 0)")


class InsufficientSamplesError(AmcError):
    """Too few masked samples to form a statistic."""


class NumericConsistencyError(AmcError):
    """A variance radicand went negative beyond rounding tolerance."""


class ZeroSpectrumError(AmcError):
    """Both sidebands carry no power."""


class FeatureExtractionError(AmcError):
    """A single feature failed; wraps the underlying error."""

    def __init__(self, feature: str, cause: Exception):
        self.feature = feature
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", EXIT_DATA)
        super().__init__(f"feature {feature} failed: {cause}")


class DegenerateLabelsError(AmcError):
    """Binary training data contains a single class."""


class InsufficientClassDataError(AmcError):
    """A class has fewer rows than multiclass training needs."""

    def __init__(self, label: str, count: int, required: int = 2, message: Optional[str] = None):
        self.label = label
        self.count = count
        super().__init__(message or f"class {label} has {count} rows, at least {required} required")


class NonFiniteInputError(AmcError):
    """A feature vector contains NaN or infinity."""


class ConvergenceError(AmcError):
    """SMO hit its pass limit with KKT violations left."""

    exit_code = EXIT_CONVERGENCE

    def __init__(self, passes: int, worst_violation: float):
        self.passes = passes
        self.worst_violation = worst_violation
        super().__init__(
            f"SMO did not converge after {passes} passes; worst KKT violation {worst_violation:.3e}"
        )


class RecordValidationError(AmcError):
    """A feature record failed validation before insertion."""


class PersistenceError(AmcError):
    """The backing database could not store a record."""


class FormatError(AmcError):
    """A file does not follow its declared format."""

    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = ""
        if path is not None:
            where += f" in {path}"
        if offset is not None:
            where += f" at byte offset {offset}"
        super().__init__(f"{message}{where}")
