"""Weighted class-participation scoring.

The class score is the weighted sum of per-student reaction values; weights
come from each student's reaction history through a log coefficient, so
students who participated more (especially positively) count more.  The
score maps to a three-level verdict via fixed thresholds.

All functions here are pure; state lives in the caller.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import EmptyClassroomError, InvalidInputError

log = logging.getLogger(__name__)


class ReactionLabel(Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"


# Fixed order used everywhere labels are indexed (sampling, vectorized code).
REACTION_ORDER = (ReactionLabel.POSITIVE, ReactionLabel.NEGATIVE, ReactionLabel.NEUTRAL)


@dataclass(frozen=True)
class StudentRecord:
    """Identity plus cumulative reaction counts (p positive, n negative)."""

    student_id: str
    display_name: str = ""
    p: int = 0
    n: int = 0

    def __post_init__(self):
        if self.p < 0 or self.n < 0:
            raise InvalidInputError("reaction counts must be non-negative")


@dataclass(frozen=True)
class EvaluationParams:
    positive_value: float = 1.0
    negative_value: float = -1.2
    neutral_value: float = 0.0
    positive_threshold: float = 0.2
    negative_threshold: float = -0.15
    max_students: int = 30

    def __post_init__(self):
        if not (self.negative_value < self.neutral_value < self.positive_value):
            raise InvalidInputError("reaction values must satisfy negative < neutral < positive")
        if not self.negative_threshold < self.positive_threshold:
            raise InvalidInputError("negative_threshold must be below positive_threshold")


DEFAULT_PARAMS = EvaluationParams()


@dataclass(frozen=True)
class ClassEvaluation:
    r_class: float
    level: ReactionLabel
    per_student: list[tuple[str, float, float]]  # (student_id, weight, reaction value)
    ts_ms: int = 0


def reaction_value(label: ReactionLabel, params: EvaluationParams = DEFAULT_PARAMS) -> float:
    if label is ReactionLabel.POSITIVE:
        return params.positive_value
    if label is ReactionLabel.NEGATIVE:
        return params.negative_value
    return params.neutral_value


def weight_coefficient(p: int, n: int) -> float:
    """log(2p + n), clamped to 0 when 2p + n <= 1.

    The clamp covers the log-domain hole: a student with no meaningful
    history contributes no weight.
    """
    x = 2 * p + n
    if x <= 1:
        return 0.0
    return math.log(x)


def weights(records: list[StudentRecord]) -> list[float]:
    """Normalized history weights, summing to 1.

    Falls back to uniform weights when every coefficient clamps to zero.
    """
    if not records:
        raise EmptyClassroomError("cannot compute weights for an empty roster")
    coeffs = [weight_coefficient(r.p, r.n) for r in records]
    total = sum(coeffs)
    if total == 0.0:
        return [1.0 / len(records)] * len(records)
    return [c / total for c in coeffs]


def classify_level(r_class: float, params: EvaluationParams = DEFAULT_PARAMS) -> ReactionLabel:
    if r_class >= params.positive_threshold:
        return ReactionLabel.POSITIVE
    if r_class < params.negative_threshold:
        return ReactionLabel.NEGATIVE
    return ReactionLabel.NEUTRAL


def class_score(
    records: list[StudentRecord],
    current_reactions: list[ReactionLabel],
    params: EvaluationParams = DEFAULT_PARAMS,
    ts_ms: int = 0,
) -> ClassEvaluation:
    """Evaluate the class from per-student current reactions.

    Records are not mutated; history updates happen separately through
    apply_reaction so the current tick's reactions affect weights only from
    the next evaluation onward.
    """
    if len(records) != len(current_reactions):
        raise InvalidInputError(
            f"{len(records)} records but {len(current_reactions)} reactions"
        )
    if not records:
        raise EmptyClassroomError("cannot evaluate an empty classroom")
    if len(records) > params.max_students:
        log.warning("roster size %d exceeds the intended maximum of %d",
                    len(records), params.max_students)
    w = weights(records)
    values = [reaction_value(label, params) for label in current_reactions]
    r = sum(wi * vi for wi, vi in zip(w, values))
    # weights sum to 1 only within rounding; keep the score inside its range
    r = min(max(r, params.negative_value), params.positive_value)
    return ClassEvaluation(
        r_class=r,
        level=classify_level(r, params),
        per_student=[(rec.student_id, wi, vi) for rec, wi, vi in zip(records, w, values)],
        ts_ms=ts_ms,
    )


def apply_reaction(record: StudentRecord, label: ReactionLabel) -> StudentRecord:
    """Return the record with the reaction folded into its history."""
    if label is ReactionLabel.POSITIVE:
        return replace(record, p=record.p + 1)
    if label is ReactionLabel.NEGATIVE:
        return replace(record, n=record.n + 1)
    return record
