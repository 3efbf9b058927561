"""Exception hierarchy for lidmed.

Input problems derive from ``ValueError`` and numerical failures from
``ArithmeticError`` so callers can catch either family without importing
anything from this module. The CLI maps ``InputError`` to exit code 1 and
``ArithmeticError`` to exit code 2.
"""


class LidmedError(Exception):
    """Base class for every error raised by lidmed."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class InputError(LidmedError, ValueError):
    """The caller supplied something that is not a valid input."""


class ShapeMismatch(InputError):
    pass


class ProfileMismatch(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class NotHermitian(InputError):
    pass


class NotPositiveSemidefinite(InputError):
    pass


class NotPositiveDefinite(InputError):
    pass


class RankMismatch(InputError):
    pass


class InvalidEnsemble(InputError):
    pass


class InvalidDocument(InputError):
    pass


class ComputationError(LidmedError, ArithmeticError):
    """A numerical procedure failed on an otherwise valid input."""


class MaxIterationsExceeded(ComputationError):
    pass


class NonPositiveIterate(ComputationError):
    pass


class SingularLinearSystem(ComputationError):
    pass


class PathBreakdown(ComputationError):
    pass


class DegenerateDraw(ComputationError):
    pass


class SingularAverage(ComputationError):
    pass
