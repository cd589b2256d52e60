"""Exception types shared across the package."""
from __future__ import annotations


class ClasspulseError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ClasspulseError, ValueError):
    """A caller-supplied value violates a precondition."""


class DegenerateConfigurationError(ClasspulseError):
    """Point geometry does not determine a unique pose (coplanar/collinear
    correspondences, rank-deficient normal equations)."""


class EmptyClassroomError(ClasspulseError):
    """An evaluation was requested for an empty roster."""


class InfeasibleCohortError(ClasspulseError):
    """A cohort specification cannot be satisfied (e.g. a balanced group
    with no even history total in range)."""


class UnreachableTargetError(ClasspulseError):
    """Greedy reaction assignment could not reach the requested class score
    within its tolerance and flip budget."""


class ReplayParseError(ClasspulseError):
    """An event log or trace file failed to parse.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, path: str, line_number: int, reason: str):
        self.path = path
        self.line_number = line_number
        self.reason = reason
        super().__init__(f"{path}:{line_number}: {reason}")


class ServiceRejection(ClasspulseError):
    """A client message was rejected; carries the wire error code."""

    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")
