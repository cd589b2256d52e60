"""Monte Carlo evaluation of the class-scoring method under sensor noise.

For each target class score in a sweep, trials draw a student cohort,
assign true reactions hitting the target, push every reaction through a
noisy sensing channel, and compare the predicted score and level against
the truth.  Per-trial random substreams are derived from
(seed, case index, trial index), so cases are order-independent and the
whole sweep is reproducible regardless of execution order.

Per trial the draws happen in a fixed order: cohort totals, cohort splits,
initial assignment, channel choices, observation variates.  With a fixed
cohort the first two draws are skipped.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import InfeasibleCohortError, InvalidInputError, UnreachableTargetError
from .evaluation import (
    DEFAULT_PARAMS,
    REACTION_ORDER,
    EvaluationParams,
    ReactionLabel,
    StudentRecord,
    weight_coefficient,
)
from .sensors import ConfusionModel, default_confusion_model

log = logging.getLogger(__name__)

# Spawn key reserved for the fixed-cohort draw; trial keys are 2-tuples of
# (case index, trial index) with case index far below 2**31.
_FIXED_COHORT_KEY = (2**31, 0)


class Weighting(Enum):
    WEIGHTED = "weighted"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class CohortSpec:
    """Cohort composition: group sizes and per-student history bounds."""

    n_students: int = 30
    history_min: int = 6
    history_max: int = 12
    n_more_positive: int = 16
    n_more_negative: int = 10
    n_balanced: int = 4

    def __post_init__(self):
        if self.n_more_positive + self.n_more_negative + self.n_balanced != self.n_students:
            raise InvalidInputError("group sizes must add up to n_students")
        if min(self.n_more_positive, self.n_more_negative, self.n_balanced) < 0:
            raise InvalidInputError("group sizes must be non-negative")
        if not 0 < self.history_min <= self.history_max:
            raise InvalidInputError("need 0 < history_min <= history_max")


@dataclass(frozen=True)
class SweepConfig:
    target_min: float = -1.2
    target_max: float = 1.0
    step: float = 0.1
    trials_per_case: int = 1000
    seed: int = 0
    channel_split: float = 0.5
    weighting: Weighting = Weighting.WEIGHTED
    target_tolerance: float = 0.05

    def __post_init__(self):
        if not self.target_min < self.target_max:
            raise InvalidInputError("target_min must be below target_max")
        if self.step <= 0:
            raise InvalidInputError("step must be positive")
        if self.trials_per_case < 1:
            raise InvalidInputError("trials_per_case must be at least 1")
        if not 0.0 <= self.channel_split <= 1.0:
            raise InvalidInputError("channel_split must lie in [0, 1]")
        if self.target_tolerance <= 0:
            raise InvalidInputError("target_tolerance must be positive")


@dataclass(frozen=True)
class CaseResult:
    target_r_class: float
    mean_true_r_class: float
    mean_predicted_r_class: float
    deviation: float
    level_accuracy: float
    trials: int


@dataclass(frozen=True)
class SweepResult:
    targets: list[float]
    cases: list[CaseResult | None]  # None marks a skipped (unreachable) case
    mean_level_accuracy: float
    weighting: Weighting
    seed: int


def trial_rng(seed: int, case_index: int, trial_index: int) -> np.random.Generator:
    """Independent substream for one (case, trial) pair."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(case_index, trial_index)))


def _balanced_totals(spec: CohortSpec) -> np.ndarray:
    evens = np.arange(spec.history_min, spec.history_max + 1)
    evens = evens[evens % 2 == 0]
    if spec.n_balanced > 0 and evens.size == 0:
        raise InfeasibleCohortError(
            f"no even history total in [{spec.history_min}, {spec.history_max}] "
            "for the balanced group"
        )
    return evens


def _cohort_counts(spec: CohortSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw per-student (positive, negative) history counts.

    Consumes exactly two uniform vectors of length n_students, in order:
    totals then splits.
    """
    n = spec.n_students
    evens = _balanced_totals(spec)
    group = np.zeros(n, dtype=np.int64)  # 0 more-positive, 1 more-negative, 2 balanced
    group[spec.n_more_positive:spec.n_more_positive + spec.n_more_negative] = 1
    group[spec.n_more_positive + spec.n_more_negative:] = 2

    u_total = rng.random(n)
    u_split = rng.random(n)

    span = spec.history_max - spec.history_min + 1
    totals = spec.history_min + (u_total * span).astype(np.int64)
    if evens.size:
        totals = np.where(group == 2, evens[(u_total * evens.size).astype(np.int64)], totals)

    # p > n: p in [t//2 + 1, t];  n > p: p in [0, ceil(t/2) - 1];  p = n: p = t/2
    lo_pos = totals // 2 + 1
    cnt_pos = totals - lo_pos + 1
    cnt_neg = (totals + 1) // 2
    p = np.where(
        group == 0,
        lo_pos + (u_split * cnt_pos).astype(np.int64),
        np.where(group == 1, (u_split * cnt_neg).astype(np.int64), totals // 2),
    )
    return p, totals - p


def generate_cohort(spec: CohortSpec, rng: np.random.Generator) -> list[StudentRecord]:
    """Draw a cohort of StudentRecords matching the group constraints."""
    p, n = _cohort_counts(spec, rng)
    return [
        StudentRecord(student_id=f"s{i:02d}", display_name=f"student-{i}", p=int(p[i]), n=int(n[i]))
        for i in range(spec.n_students)
    ]


def _history_weights(p: np.ndarray, n: np.ndarray, weighting: Weighting) -> np.ndarray:
    """Row-normalized weights for (trials, students) count matrices."""
    n_students = p.shape[-1]
    if weighting is Weighting.UNIFORM:
        return np.full(p.shape, 1.0 / n_students)
    x = 2 * p + n
    f = np.where(x > 1, np.log(np.maximum(x, 2)), 0.0)
    s = f.sum(axis=-1, keepdims=True)
    return np.divide(f, s, out=np.full_like(f, 1.0 / n_students), where=s > 0)


def _levels(r: np.ndarray, params: EvaluationParams) -> np.ndarray:
    """Vectorized classify_level as REACTION_ORDER indices."""
    return np.where(r >= params.positive_threshold, 0,
                    np.where(r < params.negative_threshold, 1, 2))


def _greedy_repair(
    w: np.ndarray,
    assign: np.ndarray,
    target: float,
    values: np.ndarray,
    tolerance: float,
    flip_budget: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Drive each trial's weighted score within tolerance of the target.

    Repeatedly flips, per trial, the single student reaction whose change
    most reduces |r - target| (ties broken by lowest student then label
    index).  Trials where no single flip improves are unreachable.

    Returns the final assignments and a boolean mask of unreachable trials.
    """
    trials = assign.shape[0]
    r = (w * values[assign]).sum(axis=1)
    dist = np.abs(r - target)
    active = dist > tolerance
    stuck = np.zeros(trials, dtype=bool)

    for _ in range(flip_budget):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        delta = w[idx][:, :, None] * (values[None, None, :] - values[assign[idx]][:, :, None])
        cand = np.abs((r[idx] - target)[:, None, None] + delta).reshape(idx.size, -1)
        best = cand.argmin(axis=1)
        best_dist = cand[np.arange(idx.size), best]
        improved = best_dist < dist[idx]

        sel = idx[improved]
        rows = np.nonzero(improved)[0]
        student = best[improved] // values.size
        label = best[improved] % values.size
        r[sel] += delta[rows, student, label]
        assign[sel, student] = label
        dist[sel] = best_dist[improved]
        active[sel] = dist[sel] > tolerance

        dead = idx[~improved]
        stuck[dead] = True
        active[dead] = False

    return assign, stuck | active


def assign_reactions_for_target(
    target: float,
    records: list[StudentRecord],
    params: EvaluationParams,
    rng: np.random.Generator,
    *,
    weighting: Weighting = Weighting.WEIGHTED,
    target_tolerance: float = 0.05,
    flip_budget: int | None = None,
) -> list[ReactionLabel]:
    """Random assignment repaired until its exact score is near the target."""
    if not params.negative_value <= target <= params.positive_value:
        raise InvalidInputError(f"target {target} outside the reachable score range")
    n = len(records)
    p = np.array([rec.p for rec in records])[None, :]
    cnt_n = np.array([rec.n for rec in records])[None, :]
    w = _history_weights(p, cnt_n, weighting)
    values = np.array([params.positive_value, params.negative_value, params.neutral_value])
    assign = rng.integers(0, 3, size=(1, n))
    assign, unreachable = _greedy_repair(
        w, assign, target, values, target_tolerance, flip_budget or 10 * n
    )
    if unreachable[0]:
        raise UnreachableTargetError(f"no assignment within {target_tolerance} of {target}")
    return [REACTION_ORDER[k] for k in assign[0]]


def run_case(
    target: float,
    spec: CohortSpec,
    sweep_cfg: SweepConfig,
    model: ConfusionModel | None = None,
    params: EvaluationParams = DEFAULT_PARAMS,
    *,
    case_index: int = 0,
    fixed_cohort: tuple[np.ndarray, np.ndarray] | None = None,
) -> CaseResult:
    """Run all trials for one target and aggregate the outcome.

    Trials are vectorized internally but every trial's randomness comes
    from its own (seed, case_index, trial_index) substream, so results do
    not depend on batching or execution order.
    """
    model = model or default_confusion_model()
    trials = sweep_cfg.trials_per_case
    n = spec.n_students

    p_mat = np.empty((trials, n), dtype=np.int64)
    n_mat = np.empty((trials, n), dtype=np.int64)
    assign = np.empty((trials, n), dtype=np.int64)
    chan = np.empty((trials, n), dtype=np.int64)
    obs_u = np.empty((trials, n))
    for t in range(trials):
        rng = trial_rng(sweep_cfg.seed, case_index, t)
        if fixed_cohort is None:
            p_mat[t], n_mat[t] = _cohort_counts(spec, rng)
        else:
            p_mat[t], n_mat[t] = fixed_cohort
        assign[t] = rng.integers(0, 3, size=n)
        chan[t] = (rng.random(n) >= sweep_cfg.channel_split).astype(np.int64)  # 0 = head
        obs_u[t] = rng.random(n)

    w = _history_weights(p_mat, n_mat, sweep_cfg.weighting)
    values = np.array([params.positive_value, params.negative_value, params.neutral_value])
    assign, unreachable = _greedy_repair(
        w, assign, target, values, sweep_cfg.target_tolerance, 10 * n
    )
    if unreachable.any():
        raise UnreachableTargetError(
            f"{int(unreachable.sum())}/{trials} trials could not reach target {target}"
        )

    r_true = (w * values[assign]).sum(axis=1)
    true_level = _levels(r_true, params)

    cum = model.cumulative()
    rows = cum[chan, assign]  # (trials, students, 3)
    observed = (obs_u >= rows[..., 0]).astype(np.int64) + (obs_u >= rows[..., 1])
    r_pred = (w * values[observed]).sum(axis=1)
    pred_level = _levels(r_pred, params)

    mean_true = float(r_true.mean())
    mean_pred = float(r_pred.mean())
    return CaseResult(
        target_r_class=target,
        mean_true_r_class=mean_true,
        mean_predicted_r_class=mean_pred,
        deviation=abs(mean_pred - mean_true),
        level_accuracy=float((pred_level == true_level).mean()),
        trials=trials,
    )


def sweep_targets(cfg: SweepConfig) -> list[float]:
    targets = []
    k = 0
    while True:
        t = round(cfg.target_min + k * cfg.step, 10)
        if t > cfg.target_max + 1e-9:
            break
        targets.append(t)
        k += 1
    return targets


def run_sweep(
    spec: CohortSpec,
    sweep_cfg: SweepConfig,
    model: ConfusionModel | None = None,
    params: EvaluationParams = DEFAULT_PARAMS,
    *,
    fixed_cohort: bool = False,
) -> SweepResult:
    """Run every target case; unreachable cases are skipped, not faked."""
    model = model or default_confusion_model()
    cohort_counts = None
    if fixed_cohort:
        rng = np.random.default_rng(
            np.random.SeedSequence(sweep_cfg.seed, spawn_key=_FIXED_COHORT_KEY)
        )
        cohort_counts = _cohort_counts(spec, rng)

    targets = sweep_targets(sweep_cfg)
    cases: list[CaseResult | None] = []
    for i, target in enumerate(targets):
        try:
            cases.append(run_case(
                target, spec, sweep_cfg, model, params,
                case_index=i, fixed_cohort=cohort_counts,
            ))
        except UnreachableTargetError as exc:
            log.warning("case %d (target %s) skipped: %s", i, target, exc)
            cases.append(None)

    completed = [c.level_accuracy for c in cases if c is not None]
    mean_acc = float(np.mean(completed)) if completed else float("nan")
    return SweepResult(
        targets=targets,
        cases=cases,
        mean_level_accuracy=mean_acc,
        weighting=sweep_cfg.weighting,
        seed=sweep_cfg.seed,
    )


CSV_HEADER = ("target_r_class,mean_true_r_class,mean_predicted_r_class,"
              "deviation,level_accuracy,trials,weighting,seed")


def write_csv(result: SweepResult, path: str | Path) -> None:
    """One row per case; skipped cases keep their target with trials=0."""
    lines = [CSV_HEADER]
    for target, case in zip(result.targets, result.cases):
        if case is None:
            lines.append(f"{target!r},,,,,0,{result.weighting.value},{result.seed}")
        else:
            lines.append(
                f"{case.target_r_class!r},{case.mean_true_r_class!r},"
                f"{case.mean_predicted_r_class!r},{case.deviation!r},"
                f"{case.level_accuracy!r},{case.trials},"
                f"{result.weighting.value},{result.seed}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
