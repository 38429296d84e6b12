"""Exception types shared across the toolkit."""


class RotboxError(Exception):
    """Base class for every error raised by this package."""


class InvalidBoxError(RotboxError, ValueError):
    """Rotated-box parameters are unusable (non-finite, or sides below the minimum)."""


class DegenerateInputError(RotboxError, ValueError):
    """Input geometry collapses to zero area where positive area is required."""


class InvalidPolygonError(RotboxError, ValueError):
    """Polygon input is non-convex or degenerate."""


class MatrixDomainError(RotboxError, ValueError):
    """Covariance matrix lies outside the symmetric positive-definite domain."""


class AngleRangeError(RotboxError, ValueError):
    """Angle lies outside the range a codec supports."""


class AnnotationParseError(RotboxError, ValueError):
    """Malformed annotation, submission, or record text.

    Carries the offending position so callers can point at the file/line.
    """

    def __init__(self, message: str, *, source: str | None = None, line: int | None = None):
        loc = ""
        if source is not None:
            loc += f"{source}:"
        if line is not None:
            loc += f"line {line}: "
        super().__init__(loc + message)
        self.source = source
        self.line = line


class RecordVersionError(RotboxError, ValueError):
    """Record file declares a format version this build does not support."""
