# lib/errors.py
class FuzzyHolonomyError(Exception):
    """Base class for every error raised by the library."""


class ValidationError(FuzzyHolonomyError, ValueError):
    """Invalid input. `field` names the offending input path when known, e.g. `lie_basis[0]`."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DimensionError(ValidationError):
    """Shape or length mismatch."""


class NotHermitianError(ValidationError):
    """A hermiticity precondition was violated."""


class ScenarioFormatError(ValidationError):
    """Malformed scenario or report file."""


class GuardError(FuzzyHolonomyError):
    """Exponential argument too large for an accurate matrix exponential."""

    def __init__(self, message, hint=None):
        self.hint = hint
        if hint:
            message = f"{message} (hint: {hint})"
        super().__init__(message)
