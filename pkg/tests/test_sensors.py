import numpy as np
import pytest
from scipy import stats

from classpulse.errors import InvalidInputError
from classpulse.evaluation import REACTION_ORDER, ReactionLabel
from classpulse.headpose import GestureKind, HeadGesture
from classpulse.sensors import (
    Channel,
    ConfusionModel,
    ExpressionLabel,
    default_confusion_model,
    expression_to_reaction,
    gesture_to_reaction,
    identity_confusion_model,
    load_confusion_model,
    observe,
    save_confusion_model,
)

POS, NEG, NEU = ReactionLabel.POSITIVE, ReactionLabel.NEGATIVE, ReactionLabel.NEUTRAL


def gesture(kind):
    return HeadGesture(kind=kind, ts_ms=0, delta_deg=15.0)


def test_nod_is_positive():
    assert gesture_to_reaction(gesture(GestureKind.NOD)) is POS


def test_shake_is_negative():
    assert gesture_to_reaction(gesture(GestureKind.SHAKE)) is NEG


@pytest.mark.parametrize("expression,expected", [
    (ExpressionLabel.HAPPINESS, POS),
    (ExpressionLabel.FOCUSED, POS),
    (ExpressionLabel.CONFUSED, NEG),
    (ExpressionLabel.DISGUST, NEG),
    (ExpressionLabel.TIRED, NEG),
    (ExpressionLabel.NEUTRAL, NEU),
])
def test_expression_polarity(expression, expected):
    assert expression_to_reaction(expression) is expected


class TestDefaultModel:
    def test_head_rows_are_exact_count_ratios(self):
        model = default_confusion_model()
        np.testing.assert_allclose(model.row(Channel.HEAD, POS), [25 / 30, 3 / 30, 2 / 30])
        np.testing.assert_allclose(model.row(Channel.HEAD, NEG), [5 / 30, 24 / 30, 1 / 30])
        np.testing.assert_allclose(model.row(Channel.HEAD, NEU), [0.0, 0.0, 1.0])

    def test_expression_rows_are_exact_count_ratios(self):
        model = default_confusion_model()
        np.testing.assert_allclose(model.row(Channel.EXPRESSION, POS), [38 / 49, 6 / 49, 5 / 49])
        np.testing.assert_allclose(model.row(Channel.EXPRESSION, NEG), [19 / 84, 60 / 84, 5 / 84])
        np.testing.assert_allclose(model.row(Channel.EXPRESSION, NEU),
                                   [6 / 148, 11 / 148, 131 / 148])

    def test_rows_sum_to_one(self):
        for model in (default_confusion_model(), identity_confusion_model()):
            np.testing.assert_allclose(model.probs.sum(axis=2), 1.0, atol=1e-12)

    def test_reported_accuracies(self):
        model = default_confusion_model()
        assert model.row(Channel.HEAD, POS)[0] == pytest.approx(0.833, abs=5e-4)
        assert model.row(Channel.EXPRESSION, NEU)[2] == pytest.approx(0.885, abs=5e-4)


class TestModelValidation:
    def test_row_not_summing_to_one_rejected(self):
        probs = identity_confusion_model().probs.copy()
        probs[0, 0] = [0.5, 0.4, 0.2]
        with pytest.raises(InvalidInputError):
            ConfusionModel(probs=probs)

    def test_negative_probability_rejected(self):
        probs = identity_confusion_model().probs.copy()
        probs[1, 2] = [1.5, -0.5, 0.0]
        with pytest.raises(InvalidInputError):
            ConfusionModel(probs=probs)

    def test_wrong_shape_rejected(self):
        with pytest.raises(InvalidInputError):
            ConfusionModel(probs=np.eye(3))


class TestObserve:
    def test_degenerate_row_is_deterministic(self):
        model = default_confusion_model()
        rng = np.random.default_rng(0)
        assert all(observe(NEU, Channel.HEAD, model, rng) is NEU for _ in range(100))

    def test_identity_model_echoes_truth(self):
        model = identity_confusion_model()
        rng = np.random.default_rng(0)
        for label in REACTION_ORDER:
            for channel in Channel:
                assert observe(label, channel, model, rng) is label

    def test_same_seed_same_sequence(self):
        model = default_confusion_model()
        rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(7)
        seq_a = [observe(POS, Channel.EXPRESSION, model, rng_a) for _ in range(200)]
        seq_b = [observe(POS, Channel.EXPRESSION, model, rng_b) for _ in range(200)]
        assert seq_a == seq_b
        assert len(set(seq_a)) > 1  # the noisy row actually mixes labels

    def test_law_of_large_numbers_head_positive(self):
        # empirical frequency of the (true positive, head) row over 300k draws
        model = default_confusion_model()
        rng = np.random.default_rng(2024)
        draws = 300_000
        hits = sum(observe(POS, Channel.HEAD, model, rng) is POS for _ in range(draws))
        assert hits / draws == pytest.approx(25 / 30, abs=0.005)

    def test_chi_squared_goodness_of_fit(self):
        model = default_confusion_model()
        rng = np.random.default_rng(99)
        draws = 100_000
        counts = {label: 0 for label in REACTION_ORDER}
        for _ in range(draws):
            counts[observe(NEG, Channel.EXPRESSION, model, rng)] += 1
        observed = [counts[label] for label in REACTION_ORDER]
        expected = model.row(Channel.EXPRESSION, NEG) * draws
        _, p_value = stats.chisquare(observed, expected)
        assert p_value > 0.01


class TestModelFile:
    def test_round_trip(self, tmp_path):
        model = default_confusion_model()
        path = tmp_path / "confusion.txt"
        save_confusion_model(model, path)
        loaded = load_confusion_model(path)
        np.testing.assert_array_equal(loaded.probs, model.probs)

    def test_incomplete_table_rejected(self, tmp_path):
        path = tmp_path / "partial.txt"
        path.write_text("head positive positive 1.0\n")
        with pytest.raises(InvalidInputError):
            load_confusion_model(path)

    def test_non_stochastic_row_rejected(self, tmp_path):
        model = default_confusion_model()
        path = tmp_path / "bad.txt"
        save_confusion_model(model, path)
        text = path.read_text().replace(repr(25 / 30), "0.9")
        path.write_text(text)
        with pytest.raises(InvalidInputError):
            load_confusion_model(path)

    def test_unknown_label_rejected(self, tmp_path):
        path = tmp_path / "label.txt"
        path.write_text("head positive bored 1.0\n")
        with pytest.raises(InvalidInputError):
            load_confusion_model(path)

    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "ok.txt"
        save_confusion_model(identity_confusion_model(), path)
        content = "# leading comment\n\n" + path.read_text()
        path.write_text(content)
        loaded = load_confusion_model(path)
        np.testing.assert_array_equal(loaded.probs, identity_confusion_model().probs)
