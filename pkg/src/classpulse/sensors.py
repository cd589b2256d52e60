"""Reaction sensing: gesture/expression mapping and noisy-channel models.

Head gestures and expression labels reduce to POSITIVE / NEGATIVE / NEUTRAL
reactions.  For simulation, each sensing channel carries a measured
confusion model: the conditional distribution of the observed reaction
given the true one.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .evaluation import REACTION_ORDER, ReactionLabel
from .headpose import GestureKind, HeadGesture


class ExpressionLabel(Enum):
    HAPPINESS = "happiness"
    FOCUSED = "focused"
    CONFUSED = "confused"
    DISGUST = "disgust"
    TIRED = "tired"
    NEUTRAL = "neutral"


class Channel(Enum):
    HEAD = "head"
    EXPRESSION = "expression"


CHANNEL_ORDER = (Channel.HEAD, Channel.EXPRESSION)

_POSITIVE_EXPRESSIONS = frozenset({ExpressionLabel.HAPPINESS, ExpressionLabel.FOCUSED})
_NEGATIVE_EXPRESSIONS = frozenset(
    {ExpressionLabel.DISGUST, ExpressionLabel.CONFUSED, ExpressionLabel.TIRED}
)


def gesture_to_reaction(gesture: HeadGesture) -> ReactionLabel:
    """Nodding signals understanding; shaking signals the opposite."""
    if gesture.kind is GestureKind.NOD:
        return ReactionLabel.POSITIVE
    return ReactionLabel.NEGATIVE


def expression_to_reaction(expression: ExpressionLabel) -> ReactionLabel:
    if expression in _POSITIVE_EXPRESSIONS:
        return ReactionLabel.POSITIVE
    if expression in _NEGATIVE_EXPRESSIONS:
        return ReactionLabel.NEGATIVE
    return ReactionLabel.NEUTRAL


_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ConfusionModel:
    """Per-channel row-stochastic observation model.

    ``probs[channel, true, observed]`` indexes CHANNEL_ORDER and
    REACTION_ORDER; every (channel, true) row sums to 1.
    """

    probs: np.ndarray  # (2, 3, 3)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2, 3, 3):
            raise InvalidInputError(f"confusion model must be 2x3x3, got {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise InvalidInputError("confusion probabilities must lie in [0, 1]")
        row_sums = p.sum(axis=2)
        if np.any(np.abs(row_sums - 1.0) > _ROW_SUM_TOL):
            raise InvalidInputError("confusion rows must each sum to 1")
        object.__setattr__(self, "probs", p)

    def row(self, channel: Channel, true_label: ReactionLabel) -> np.ndarray:
        return self.probs[CHANNEL_ORDER.index(channel), REACTION_ORDER.index(true_label)]

    def cumulative(self) -> np.ndarray:
        """Row-wise cumulative sums for inverse-CDF sampling."""
        return np.cumsum(self.probs, axis=2)


def default_confusion_model() -> ConfusionModel:
    """The measured sensor behavior, as exact count ratios.

    Head channel: 30 nod trials and 30 shake trials; a resting (neutral)
    head was not measured, so true NEUTRAL is modeled as observed NEUTRAL
    with probability 1.  Expression channel: 49 positive, 84 negative and
    148 neutral test samples.
    """
    head = np.array([
        [25 / 30, 3 / 30, 2 / 30],   # true positive (nod)
        [5 / 30, 24 / 30, 1 / 30],   # true negative (shake)
        [0.0, 0.0, 1.0],             # true neutral: unmeasured, assumed exact
    ])
    expression = np.array([
        [38 / 49, 6 / 49, 5 / 49],       # true positive
        [19 / 84, 60 / 84, 5 / 84],      # true negative
        [6 / 148, 11 / 148, 131 / 148],  # true neutral
    ])
    return ConfusionModel(probs=np.stack([head, expression]))


def identity_confusion_model() -> ConfusionModel:
    """Noiseless channels: the observed reaction always equals the true one."""
    eye = np.eye(3)
    return ConfusionModel(probs=np.stack([eye, eye]))


def observe(
    true_label: ReactionLabel,
    channel: Channel,
    model: ConfusionModel,
    rng: np.random.Generator,
) -> ReactionLabel:
    """Sample one observed reaction by inverse CDF over REACTION_ORDER.

    Deterministic given the rng state; the caller owns one rng per worker.
    """
    row = model.row(channel, true_label)
    u = rng.random()
    acc = 0.0
    for label, p in zip(REACTION_ORDER, row):
        acc += p
        if u < acc:
            return label
    return REACTION_ORDER[-1]


def save_confusion_model(model: ConfusionModel, path: str | Path) -> None:
    """Write the plain-text (channel, true, observed, probability) table."""
    lines = ["# channel true_label observed_label probability"]
    for ci, channel in enumerate(CHANNEL_ORDER):
        for ti, true_label in enumerate(REACTION_ORDER):
            for oi, obs_label in enumerate(REACTION_ORDER):
                lines.append(
                    f"{channel.value} {true_label.value} {obs_label.value} "
                    f"{float(model.probs[ci, ti, oi])!r}"
                )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_confusion_model(path: str | Path) -> ConfusionModel:
    """Load and validate a confusion table written by save_confusion_model.

    Every (channel, true_label) row must be fully specified and
    row-stochastic.
    """
    probs = np.full((2, 3, 3), np.nan)
    channels = {c.value: i for i, c in enumerate(CHANNEL_ORDER)}
    labels = {r.value: i for i, r in enumerate(REACTION_ORDER)}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise InvalidInputError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        chan, true_lab, obs_lab, prob = parts
        try:
            ci, ti, oi = channels[chan], labels[true_lab], labels[obs_lab]
        except KeyError as exc:
            raise InvalidInputError(f"{path}:{lineno}: unknown label {exc}") from None
        probs[ci, ti, oi] = float(prob)
    if np.any(np.isnan(probs)):
        raise InvalidInputError(f"{path}: incomplete confusion table")
    return ConfusionModel(probs=probs)
