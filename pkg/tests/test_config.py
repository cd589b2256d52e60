import pytest

from classpulse.config import (
    evaluation_params_from,
    headpose_config_from,
    load_config_file,
    service_tick_ms,
)
from classpulse.errors import InvalidInputError

SAMPLE = """
# pipeline tuning
headpose.pitch_threshold_deg = 9.5
headpose.refractory_ms = 1200
headpose.landmark_indices = 8, 17, 21, 22, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54

evaluation.negative_value = -1.5    # harsher penalty
evaluation.negative_threshold = -0.2
service.tick_ms = 250
"""


def test_load_and_build(tmp_path):
    path = tmp_path / "classpulse.conf"
    path.write_text(SAMPLE)
    values = load_config_file(path)

    headpose = headpose_config_from(values)
    assert headpose.pitch_threshold_deg == 9.5
    assert headpose.refractory_ms == 1200
    assert headpose.yaw_threshold_deg == 12.0  # untouched default

    params = evaluation_params_from(values)
    assert params.negative_value == -1.5
    assert params.negative_threshold == -0.2
    assert params.positive_value == 1.0

    assert service_tick_ms(values) == 250


def test_empty_mapping_gives_defaults():
    headpose = headpose_config_from({})
    assert headpose.pitch_threshold_deg == 10.0
    assert headpose.yaw_threshold_deg == 12.0
    assert headpose.refractory_ms == 900
    assert headpose.pitch_range_deg == 60.0
    assert headpose.yaw_range_deg == 75.0
    params = evaluation_params_from({})
    assert params.positive_threshold == 0.2
    assert service_tick_ms({}) == 1000


def test_model_points_override(tmp_path):
    triples = "; ".join(f"{x},{y},{z}" for x, y, z in
                        [(0, 6, 1), (-5, -4, 3), (-2, -4, 2), (2, -4, 2),
                         (5, -4, 3), (0, 0, 0), (-2, 1, 1), (2, 1, 1),
                         (-4, -3, 3), (-2, -3, 2), (2, -3, 2), (4, -3, 3),
                         (-3, 4, 2), (3, 4, 2)])
    path = tmp_path / "model.conf"
    path.write_text(f"headpose.model_points_3d = {triples}\n")
    headpose = headpose_config_from(load_config_file(path))
    assert headpose.model_array.shape == (14, 3)
    assert headpose.model_points_3d[0] == (0.0, 6.0, 1.0)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("headpose.typo_threshold = 3\n")
    with pytest.raises(InvalidInputError):
        load_config_file(path)


def test_unknown_namespace_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("dashboard.color = red\n")
    with pytest.raises(InvalidInputError):
        load_config_file(path)


def test_line_without_equals_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("headpose.refractory_ms 900\n")
    with pytest.raises(InvalidInputError):
        load_config_file(path)


def test_bad_point_triple_rejected(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("headpose.model_points_3d = 1,2\n")
    with pytest.raises(InvalidInputError):
        headpose_config_from(load_config_file(path))
