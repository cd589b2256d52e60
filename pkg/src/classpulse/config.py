"""Plain-text key/value configuration.

One `key = value` pair per line; `#` starts a comment; keys are namespaced
with a module prefix.  Recognized keys and their defaults:

    headpose.landmark_indices      = 8,17,21,22,26,30,31,35,36,39,42,45,48,54
    headpose.model_points_3d       = x,y,z; x,y,z; ...   (14 triples)
    headpose.sample_period_ms      = 100
    headpose.pitch_threshold_deg   = 10
    headpose.yaw_threshold_deg     = 12
    headpose.refractory_ms         = 900
    headpose.pitch_range_deg       = 60
    headpose.yaw_range_deg         = 75
    headpose.frontal_init_deg      = 15
    evaluation.positive_value      = 1.0
    evaluation.negative_value      = -1.2
    evaluation.neutral_value       = 0.0
    evaluation.positive_threshold  = 0.2
    evaluation.negative_threshold  = -0.15
    evaluation.max_students        = 30
    service.tick_ms                = 1000

Unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

from pathlib import Path

from .errors import InvalidInputError
from .evaluation import EvaluationParams
from .headpose import HeadPoseConfig

_KNOWN_PREFIXES = ("headpose.", "evaluation.", "service.")

_HEADPOSE_KEYS = {
    "landmark_indices", "model_points_3d", "sample_period_ms",
    "pitch_threshold_deg", "yaw_threshold_deg", "refractory_ms",
    "pitch_range_deg", "yaw_range_deg", "frontal_init_deg",
}
_EVALUATION_KEYS = {
    "positive_value", "negative_value", "neutral_value",
    "positive_threshold", "negative_threshold", "max_students",
}
_SERVICE_KEYS = {"tick_ms"}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Parse the file into a flat {namespaced_key: raw_value} mapping."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key.startswith(_KNOWN_PREFIXES):
            raise InvalidInputError(f"{path}:{lineno}: unknown key namespace in '{key}'")
        prefix, _, name = key.partition(".")
        known = {"headpose": _HEADPOSE_KEYS, "evaluation": _EVALUATION_KEYS,
                 "service": _SERVICE_KEYS}[prefix]
        if name not in known:
            raise InvalidInputError(f"{path}:{lineno}: unknown key '{key}'")
        values[key] = value
    return values


def _parse_indices(raw: str) -> tuple[int, ...]:
    return tuple(int(part.strip()) for part in raw.split(",") if part.strip())


def _parse_points(raw: str) -> tuple[tuple[float, float, float], ...]:
    points = []
    for triple in raw.split(";"):
        triple = triple.strip()
        if not triple:
            continue
        coords = [float(c.strip()) for c in triple.split(",")]
        if len(coords) != 3:
            raise InvalidInputError(f"model point '{triple}' is not an x,y,z triple")
        points.append(tuple(coords))
    return tuple(points)


def headpose_config_from(values: dict[str, str]) -> HeadPoseConfig:
    kwargs = {}
    for key, raw in values.items():
        if not key.startswith("headpose."):
            continue
        name = key.split(".", 1)[1]
        if name == "landmark_indices":
            kwargs[name] = _parse_indices(raw)
        elif name == "model_points_3d":
            kwargs[name] = _parse_points(raw)
        elif name in ("sample_period_ms", "refractory_ms"):
            kwargs[name] = int(raw)
        else:
            kwargs[name] = float(raw)
    return HeadPoseConfig(**kwargs)


def evaluation_params_from(values: dict[str, str]) -> EvaluationParams:
    kwargs = {}
    for key, raw in values.items():
        if not key.startswith("evaluation."):
            continue
        name = key.split(".", 1)[1]
        kwargs[name] = int(raw) if name == "max_students" else float(raw)
    return EvaluationParams(**kwargs)


def service_tick_ms(values: dict[str, str], default: int = 1000) -> int:
    return int(values.get("service.tick_ms", default))
