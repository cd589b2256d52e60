"""Shared test utilities.

The projection oracle here is intentionally independent of the package:
rotations come from scipy and the pinhole projection is written out by
hand, so pose-recovery tests check the solver against a separate path.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation

from classpulse.headpose import DEFAULT_LANDMARK_INDICES, DEFAULT_MODEL_POINTS

MODEL = np.asarray(DEFAULT_MODEL_POINTS, dtype=float)


def oracle_rotation(pitch_deg: float, yaw_deg: float, roll_deg: float) -> np.ndarray:
    """Rz(roll) @ Ry(yaw) @ Rx(pitch) via scipy's intrinsic ZYX composition."""
    return Rotation.from_euler("ZYX", [roll_deg, yaw_deg, pitch_deg], degrees=True).as_matrix()


def oracle_project(points: np.ndarray, rot: np.ndarray, tvec: np.ndarray,
                   k: np.ndarray) -> np.ndarray:
    cam = points @ rot.T + tvec
    uv = cam @ k.T
    return uv[:, :2] / uv[:, 2:3]


def camera_matrix(width: int = 640, height: int = 480) -> np.ndarray:
    return np.array([
        [float(width), 0.0, width / 2.0],
        [0.0, float(width), height / 2.0],
        [0.0, 0.0, 1.0],
    ])


def frame_points(pitch_deg: float, yaw_deg: float, roll_deg: float = 0.0,
                 width: int = 640, height: int = 480,
                 distance: float = 50.0) -> np.ndarray:
    """68-point landmark array whose pose landmarks project a known pose."""
    rot = oracle_rotation(pitch_deg, yaw_deg, roll_deg)
    projected = oracle_project(MODEL, rot, np.array([0.0, 0.0, distance]),
                               camera_matrix(width, height))
    pts = np.empty((68, 2))
    for i in range(68):
        pts[i] = (width / 2.0 + ((i % 9) - 4) * 5.0, height / 2.0 + ((i // 9) - 3) * 5.0)
    pts[list(DEFAULT_LANDMARK_INDICES)] = projected
    return np.clip(pts, [0.0, 0.0], [float(width), float(height)])
