"""Exception hierarchy shared across the package."""


class PhaseIdError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PhaseIdError, ValueError):
    pass


class ParseError(PhaseIdError):
    """Malformed input file. ``line`` is 1-based, counting the header."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateSampleError(ParseError):
    pass


class ValidationError(ParseError):
    pass


class AlignmentError(PhaseIdError):
    pass


class InsufficientDataError(PhaseIdError):
    pass


class InsufficientOverlapError(InsufficientDataError):
    pass


class InsufficientVarianceError(InsufficientDataError):
    pass


class SolverDivergenceError(PhaseIdError):
    pass
