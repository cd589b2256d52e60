"""Synthetic landmark frames and client traces.

Stands in for live camera capture: frames are produced by projecting the
configured 3D head model at scripted orientations, so the pose pipeline
recovers the scripted angles and scripted gestures fire deterministically.
Traces use the client->server JSON Lines format with relative timestamps.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .headpose import HeadPoseConfig
from .pnp import build_intrinsics, euler_to_rotation_vector, project_points

DEFAULT_DISTANCE = 50.0  # model units from camera to head


def synthesize_points(
    pitch_deg: float,
    yaw_deg: float,
    roll_deg: float = 0.0,
    config: HeadPoseConfig | None = None,
    width: int = 640,
    height: int = 480,
    distance: float = DEFAULT_DISTANCE,
) -> np.ndarray:
    """Full 68-point landmark set for a head at the given orientation.

    The configured pose landmarks are exact projections of the head model;
    the remaining points are deterministic filler around the face center
    (they are ignored by the pose solve but must stay inside the image).
    """
    config = config or HeadPoseConfig()
    intrinsics = build_intrinsics(width, height)
    rvec = euler_to_rotation_vector(pitch_deg, yaw_deg, roll_deg)
    tvec = np.array([0.0, 0.0, distance])
    projected = project_points(config.model_array, rvec, tvec, intrinsics)

    points = np.empty((68, 2))
    cx, cy = width / 2.0, height / 2.0
    for i in range(68):
        points[i] = (cx + ((i % 9) - 4) * 5.0, cy + ((i // 9) - 3) * 5.0)
    points[list(config.landmark_indices)] = projected
    np.clip(points[:, 0], 0.0, float(width), out=points[:, 0])
    np.clip(points[:, 1], 0.0, float(height), out=points[:, 1])
    return points


def landmarks_message(ts_ms: int, points: np.ndarray, width: int = 640,
                      height: int = 480) -> dict[str, Any]:
    return {
        "type": "landmarks",
        "ts_ms": int(ts_ms),
        "w": width,
        "h": height,
        "points": [[float(x), float(y)] for x, y in points],
    }


def gesture_trace(
    schedule: list[tuple[int, str]],
    duration_ms: int,
    classroom: str = "",
    name: str = "student",
    period_ms: int = 100,
    width: int = 640,
    height: int = 480,
    config: HeadPoseConfig | None = None,
    nod_pitch_deg: float = 12.0,
    shake_yaw_deg: float = 14.0,
) -> list[dict[str, Any]]:
    """Client message trace performing scripted gestures.

    ``schedule`` lists (time_ms, "nod" | "shake") entries; each produces a
    single-frame excursion from the frontal pose at the nearest frame time.
    Entries should be spaced beyond the detector's refractory period or
    later ones will be suppressed.
    """
    config = config or HeadPoseConfig()
    impulse: dict[int, str] = {}
    for t_ms, kind in schedule:
        if kind not in ("nod", "shake"):
            raise ValueError(f"unknown gesture kind '{kind}'")
        impulse[int(round(t_ms / period_ms))] = kind

    messages: list[dict[str, Any]] = [
        {"type": "join", "classroom": classroom, "name": name}
    ]
    for k in range(duration_ms // period_ms + 1):
        kind = impulse.get(k)
        pitch = nod_pitch_deg if kind == "nod" else 0.0
        yaw = shake_yaw_deg if kind == "shake" else 0.0
        pts = synthesize_points(pitch, yaw, 0.0, config, width, height)
        messages.append(landmarks_message(k * period_ms, pts, width, height))
    return messages


def write_trace(path: str | Path, messages: list[dict[str, Any]]) -> None:
    text = "\n".join(json.dumps(m, ensure_ascii=True) for m in messages)
    Path(path).write_text(text + "\n", encoding="utf-8")
