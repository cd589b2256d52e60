"""Head pose estimation from streamed 68-point facial landmarks.

Each student stream delivers one LandmarkFrame every ~100 ms.  From the 14
configured landmarks a PnP solve recovers the head orientation as Euler
angles; consecutive angle samples drive the nod/shake gesture detector.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ClasspulseError, InvalidInputError
from .pnp import build_intrinsics, rotation_vector_to_euler, solve_pnp

log = logging.getLogger(__name__)

# Landmark subset used for the pose solve: chin, brow corners, nose tip and
# wings, eye corners, mouth corners.  Rigid, well spread, non-coplanar.
DEFAULT_LANDMARK_INDICES = (8, 17, 21, 22, 26, 30, 31, 35, 36, 39, 42, 45, 48, 54)

# Generic anthropometric head model for the indices above.  Model frame is
# camera-aligned at the frontal pose: x right, y down, z away from the
# camera (the nose tip is the origin and the closest point).  Units are
# arbitrary model units, roughly centimeters.
DEFAULT_MODEL_POINTS = (
    (0.0, 6.6, 1.3),     # 8  chin
    (-5.0, -3.8, 2.7),   # 17 brow outer
    (-1.8, -4.2, 2.0),   # 21 brow inner
    (1.8, -4.2, 2.0),    # 22 brow inner
    (5.0, -3.8, 2.7),    # 26 brow outer
    (0.0, 0.0, 0.0),     # 30 nose tip
    (-1.6, 1.0, 1.3),    # 31 nose wing
    (1.6, 1.0, 1.3),     # 35 nose wing
    (-4.5, -3.4, 2.7),   # 36 eye outer
    (-1.6, -3.4, 2.4),   # 39 eye inner
    (1.6, -3.4, 2.4),    # 42 eye inner
    (4.5, -3.4, 2.7),    # 45 eye outer
    (-3.0, 4.0, 2.5),    # 48 mouth corner
    (3.0, 4.0, 2.5),     # 54 mouth corner
)


class GestureKind(Enum):
    NOD = "nod"
    SHAKE = "shake"


@dataclass(frozen=True)
class LandmarkFrame:
    """One timestamped 68-point landmark observation for one student."""

    student_id: str
    ts_ms: int
    width: int
    height: int
    points: np.ndarray  # (68, 2) pixel coordinates

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (68, 2):
            raise InvalidInputError(f"expected 68 landmark points, got shape {pts.shape}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("frame dimensions must be positive")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("landmark coordinates must be finite")
        if (pts[:, 0].min() < 0 or pts[:, 0].max() > self.width
                or pts[:, 1].min() < 0 or pts[:, 1].max() > self.height):
            raise InvalidInputError("landmark coordinates outside image bounds")
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class EulerSample:
    ts_ms: int
    pitch: float
    yaw: float
    roll: float


@dataclass(frozen=True)
class HeadGesture:
    kind: GestureKind
    ts_ms: int
    delta_deg: float


@dataclass(frozen=True)
class HeadPoseConfig:
    """Tunables for the landmark-to-gesture pipeline.

    All angle values are degrees.  ``refractory_ms`` suppresses repeat
    detections of one physical movement; the default slightly exceeds the
    typical 850 ms head-movement duration.
    """

    landmark_indices: tuple[int, ...] = DEFAULT_LANDMARK_INDICES
    model_points_3d: tuple[tuple[float, float, float], ...] = DEFAULT_MODEL_POINTS
    sample_period_ms: int = 100
    pitch_threshold_deg: float = 10.0
    yaw_threshold_deg: float = 12.0
    refractory_ms: int = 900
    pitch_range_deg: float = 60.0
    yaw_range_deg: float = 75.0
    frontal_init_deg: float = 15.0

    def __post_init__(self):
        idx = tuple(int(i) for i in self.landmark_indices)
        pts = tuple(tuple(float(c) for c in p) for p in self.model_points_3d)
        object.__setattr__(self, "landmark_indices", idx)
        object.__setattr__(self, "model_points_3d", pts)
        if len(idx) != len(pts):
            raise InvalidInputError("landmark_indices and model_points_3d lengths differ")
        if len(set(idx)) != len(idx):
            raise InvalidInputError("landmark indices must be pairwise distinct")
        if any(i < 0 or i > 67 for i in idx):
            raise InvalidInputError("landmark indices must lie in [0, 67]")
        if self.pitch_threshold_deg <= 0 or self.yaw_threshold_deg <= 0:
            raise InvalidInputError("gesture thresholds must be positive")
        if self.refractory_ms < self.sample_period_ms:
            raise InvalidInputError("refractory_ms must be >= sample_period_ms")
        arr = np.asarray(pts, dtype=float)
        centered = arr - arr.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-8) < 3:
            raise InvalidInputError("model points must be non-coplanar")

    @property
    def model_array(self) -> np.ndarray:
        return np.asarray(self.model_points_3d, dtype=float)


def estimate_euler(frame: LandmarkFrame, config: HeadPoseConfig | None = None) -> EulerSample | None:
    """Solve the frame's head orientation; None flags an outlier.

    A sample is an outlier when the PnP solve fails (degenerate geometry)
    or the recovered angles fall outside the plausible head motion range
    (|pitch| <= pitch_range_deg, |yaw| <= yaw_range_deg).
    """
    config = config or HeadPoseConfig()
    image_pts = frame.points[list(config.landmark_indices)]
    intrinsics = build_intrinsics(frame.width, frame.height)
    try:
        solution = solve_pnp(config.model_array, image_pts, intrinsics)
    except ClasspulseError as exc:
        log.debug("pose solve failed for %s at %d ms: %s", frame.student_id, frame.ts_ms, exc)
        return None
    pitch, yaw, roll = rotation_vector_to_euler(solution.rotation_vector)
    if abs(pitch) > config.pitch_range_deg or abs(yaw) > config.yaw_range_deg:
        return None
    return EulerSample(ts_ms=frame.ts_ms, pitch=pitch, yaw=yaw, roll=roll)


@dataclass
class GestureDetector:
    """Per-student nod/shake detector over consecutive Euler samples.

    The reference sample is seeded by the first sample in the frontal range
    (|pitch| and |yaw| within ``frontal_init_deg``); earlier samples are
    discarded.  Against the reference, |delta pitch| above the pitch
    threshold is a NOD, otherwise |delta yaw| above the yaw threshold is a
    SHAKE (pitch takes precedence when both fire).  After an emission,
    further gestures are suppressed until ``refractory_ms`` has elapsed.
    Every accepted sample becomes the new reference.

    One detector per student stream; a single instance must not be driven
    from two threads at once.
    """

    config: HeadPoseConfig = field(default_factory=HeadPoseConfig)
    reference: EulerSample | None = None
    last_emit_ms: int | None = None

    def step(self, sample: EulerSample) -> HeadGesture | None:
        ref = self.reference
        if ref is not None and sample.ts_ms <= ref.ts_ms:
            log.warning("out-of-order sample dropped (ts %d after %d)", sample.ts_ms, ref.ts_ms)
            return None
        if ref is None:
            if (abs(sample.pitch) <= self.config.frontal_init_deg
                    and abs(sample.yaw) <= self.config.frontal_init_deg):
                self.reference = sample
            return None

        self.reference = sample
        d_pitch = abs(sample.pitch - ref.pitch)
        d_yaw = abs(sample.yaw - ref.yaw)
        gesture: HeadGesture | None = None
        if d_pitch > self.config.pitch_threshold_deg:
            gesture = HeadGesture(GestureKind.NOD, sample.ts_ms, d_pitch)
        elif d_yaw > self.config.yaw_threshold_deg:
            gesture = HeadGesture(GestureKind.SHAKE, sample.ts_ms, d_yaw)
        if gesture is None:
            return None
        if (self.last_emit_ms is not None
                and sample.ts_ms - self.last_emit_ms < self.config.refractory_ms):
            return None
        self.last_emit_ms = sample.ts_ms
        return gesture
