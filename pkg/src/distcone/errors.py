"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ConeError(Exception):
    """Base class for all errors raised by distcone."""


class StructuralError(ConeError, ValueError):
    """Wrong shape, length, order or index range."""


class EntryValueError(ConeError, ValueError):
    """An entry is NaN, infinite or negative where that is not allowed."""


class ConstraintError(ConeError, ValueError):
    """A metric or admissibility constraint does not hold.

    ``violations`` carries the offending constraints so callers can report
    every one of them instead of only the first.
    """

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class CapabilityError(ConeError, RuntimeError):
    """The request exceeds what the chosen algorithm can do exactly."""
