import numpy as np
import pytest

from classpulse.errors import (
    InfeasibleCohortError,
    InvalidInputError,
    UnreachableTargetError,
)
from classpulse.evaluation import DEFAULT_PARAMS, ReactionLabel, class_score
from classpulse.sensors import default_confusion_model, identity_confusion_model
from classpulse.simulation import (
    CaseResult,
    CohortSpec,
    SweepConfig,
    Weighting,
    assign_reactions_for_target,
    generate_cohort,
    run_case,
    run_sweep,
    sweep_targets,
    trial_rng,
    write_csv,
)

POS, NEG, NEU = ReactionLabel.POSITIVE, ReactionLabel.NEGATIVE, ReactionLabel.NEUTRAL


class TestCohort:
    def test_default_composition(self):
        cohort = generate_cohort(CohortSpec(), np.random.default_rng(3))
        assert len(cohort) == 30
        assert sum(r.p > r.n for r in cohort) == 16
        assert sum(r.n > r.p for r in cohort) == 10
        balanced = [r for r in cohort if r.p == r.n]
        assert len(balanced) == 4
        for r in cohort:
            assert 6 <= r.p + r.n <= 12
        for r in balanced:
            assert (r.p + r.n) % 2 == 0

    def test_fixed_seed_reproduces_cohort(self):
        a = generate_cohort(CohortSpec(), np.random.default_rng(11))
        b = generate_cohort(CohortSpec(), np.random.default_rng(11))
        assert a == b

    def test_single_student_cohort(self):
        spec = CohortSpec(n_students=1, n_more_positive=1, n_more_negative=0, n_balanced=0)
        (record,) = generate_cohort(spec, np.random.default_rng(0))
        assert record.p > record.n

    def test_infeasible_balanced_group(self):
        spec = CohortSpec(n_students=1, history_min=7, history_max=7,
                          n_more_positive=0, n_more_negative=0, n_balanced=1)
        with pytest.raises(InfeasibleCohortError):
            generate_cohort(spec, np.random.default_rng(0))

    def test_group_sizes_must_sum(self):
        with pytest.raises(InvalidInputError):
            CohortSpec(n_students=30, n_more_positive=20, n_more_negative=10, n_balanced=4)

    def test_totals_span_the_range(self):
        # over many draws every admissible total appears
        totals = set()
        rng = np.random.default_rng(5)
        for _ in range(50):
            totals.update(r.p + r.n for r in generate_cohort(CohortSpec(), rng))
        assert totals == set(range(6, 13))


class TestAssignment:
    def setup_method(self):
        self.records = generate_cohort(CohortSpec(), np.random.default_rng(1))

    def test_extreme_positive_target_is_all_positive(self):
        # with a tight tolerance only the exact extreme solution qualifies
        labels = assign_reactions_for_target(
            1.0, self.records, DEFAULT_PARAMS, np.random.default_rng(2),
            target_tolerance=1e-9,
        )
        assert labels == [POS] * 30

    def test_extreme_negative_target_is_all_negative(self):
        labels = assign_reactions_for_target(
            -1.2, self.records, DEFAULT_PARAMS, np.random.default_rng(2),
            target_tolerance=1e-9,
        )
        assert labels == [NEG] * 30

    def test_zero_target_verified_by_reevaluation(self):
        labels = assign_reactions_for_target(
            0.0, self.records, DEFAULT_PARAMS, np.random.default_rng(3)
        )
        achieved = class_score(self.records, labels).r_class
        assert abs(achieved) <= 0.05

    @pytest.mark.parametrize("target", [-1.0, -0.4, 0.15, 0.7])
    def test_achieved_score_within_tolerance(self, target):
        for seed in range(5):
            labels = assign_reactions_for_target(
                target, self.records, DEFAULT_PARAMS, np.random.default_rng(seed)
            )
            achieved = class_score(self.records, labels).r_class
            assert abs(achieved - target) <= 0.05

    def test_uniform_weighting_assignment(self):
        labels = assign_reactions_for_target(
            0.5, self.records, DEFAULT_PARAMS, np.random.default_rng(4),
            weighting=Weighting.UNIFORM,
        )
        values = {POS: 1.0, NEG: -1.2, NEU: 0.0}
        achieved = sum(values[l] for l in labels) / 30
        assert abs(achieved - 0.5) <= 0.05

    def test_target_outside_range_rejected(self):
        with pytest.raises(InvalidInputError):
            assign_reactions_for_target(1.5, self.records, DEFAULT_PARAMS,
                                        np.random.default_rng(0))

    def test_unreachable_target_raises(self):
        with pytest.raises(UnreachableTargetError):
            assign_reactions_for_target(
                0.333, self.records, DEFAULT_PARAMS, np.random.default_rng(0),
                target_tolerance=1e-12,
            )


class TestRunCase:
    def test_identity_model_is_noise_free(self):
        cfg = SweepConfig(seed=5, trials_per_case=50)
        case = run_case(1.0, CohortSpec(), cfg, identity_confusion_model())
        assert case.level_accuracy == 1.0
        assert case.deviation == 0.0

    def test_extreme_target_fully_accurate_under_noise(self):
        cfg = SweepConfig(seed=5, trials_per_case=200)
        case = run_case(1.0, CohortSpec(), cfg, default_confusion_model())
        assert case.level_accuracy == 1.0

    def test_near_discriminant_accuracy_collapses(self):
        cfg = SweepConfig(seed=5, trials_per_case=200)
        case = run_case(0.2, CohortSpec(), cfg, default_confusion_model())
        assert case.level_accuracy < 0.6

    def test_deterministic(self):
        cfg = SweepConfig(seed=9, trials_per_case=40)
        a = run_case(0.3, CohortSpec(), cfg, default_confusion_model(), case_index=4)
        b = run_case(0.3, CohortSpec(), cfg, default_confusion_model(), case_index=4)
        assert a == b

    def test_case_index_changes_the_stream(self):
        cfg = SweepConfig(seed=9, trials_per_case=40)
        a = run_case(0.3, CohortSpec(), cfg, default_confusion_model(), case_index=0)
        b = run_case(0.3, CohortSpec(), cfg, default_confusion_model(), case_index=1)
        assert a != b

    def test_true_scores_within_tolerance_of_target(self):
        cfg = SweepConfig(seed=2, trials_per_case=100)
        case = run_case(-0.6, CohortSpec(), cfg, identity_confusion_model())
        # noiseless: predicted equals true, so the mean bounds both
        assert abs(case.mean_true_r_class - (-0.6)) <= cfg.target_tolerance


class TestSweep:
    def test_default_targets(self):
        targets = sweep_targets(SweepConfig())
        assert len(targets) == 23
        assert targets[0] == -1.2
        assert targets[-1] == 1.0
        steps = np.diff(targets)
        np.testing.assert_allclose(steps, 0.1, atol=1e-12)

    def test_sweep_deterministic_csv(self, tmp_path):
        cfg = SweepConfig(seed=3, trials_per_case=20)
        a_path, b_path = tmp_path / "a.csv", tmp_path / "b.csv"
        write_csv(run_sweep(CohortSpec(), cfg), a_path)
        write_csv(run_sweep(CohortSpec(), cfg), b_path)
        assert a_path.read_bytes() == b_path.read_bytes()

    def test_csv_format(self, tmp_path):
        cfg = SweepConfig(seed=3, trials_per_case=10)
        result = run_sweep(CohortSpec(), cfg)
        path = tmp_path / "sweep.csv"
        write_csv(result, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("target_r_class,mean_true_r_class,mean_predicted_r_class,"
                            "deviation,level_accuracy,trials,weighting,seed")
        assert len(lines) == 24
        first = lines[1].split(",")
        assert first[0] == "-1.2"
        assert first[5] == "10"
        assert first[6] == "weighted"
        assert first[7] == "3"
        for line in lines[1:]:
            for cell in line.split(",")[:5]:
                float(cell)  # numeric, '.' decimal separator

    def test_unreachable_case_marked_skipped(self, tmp_path):
        cfg = SweepConfig(seed=1, trials_per_case=5, target_min=0.31,
                          target_max=0.52, step=0.21, target_tolerance=1e-12)
        result = run_sweep(CohortSpec(), cfg)
        assert any(c is None for c in result.cases)
        path = tmp_path / "partial.csv"
        write_csv(result, path)
        skipped = [l for l in path.read_text().splitlines()[1:] if ",,,,," in l]
        assert skipped and all(l.split(",")[5] == "0" for l in skipped)

    def test_fixed_cohort_mode_runs_and_is_deterministic(self):
        cfg = SweepConfig(seed=4, trials_per_case=20, target_min=-0.2, target_max=0.2)
        a = run_sweep(CohortSpec(), cfg, fixed_cohort=True)
        b = run_sweep(CohortSpec(), cfg, fixed_cohort=True)
        assert a.cases == b.cases
        assert a.mean_level_accuracy == b.mean_level_accuracy

    def test_summary_is_mean_over_cases(self):
        cfg = SweepConfig(seed=3, trials_per_case=10, target_min=-0.5, target_max=0.5)
        result = run_sweep(CohortSpec(), cfg)
        accs = [c.level_accuracy for c in result.cases]
        assert result.mean_level_accuracy == pytest.approx(np.mean(accs))


def test_trial_rng_substreams_are_independent_of_order():
    a = trial_rng(7, 3, 11).random(4)
    b = trial_rng(7, 3, 11).random(4)
    c = trial_rng(7, 3, 12).random(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sweep_config_validation():
    with pytest.raises(InvalidInputError):
        SweepConfig(step=0.0)
    with pytest.raises(InvalidInputError):
        SweepConfig(target_min=1.0, target_max=-1.0)
    with pytest.raises(InvalidInputError):
        SweepConfig(channel_split=1.5)
    with pytest.raises(InvalidInputError):
        SweepConfig(trials_per_case=0)
