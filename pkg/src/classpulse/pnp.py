"""Perspective-n-point pose solving and rotation conversions.

The solver recovers a rigid camera pose (axis-angle rotation vector plus
translation) from 3D model points and their 2D pixel projections under a
pinhole camera.  Initialization is a direct linear transform on normalized
coordinates; refinement is Levenberg-Marquardt on the 6 pose parameters,
minimizing the sum of squared pixel reprojection errors.

Euler angles use one fixed Tait-Bryan convention throughout the package:

    R = Rz(roll) @ Ry(yaw) @ Rx(pitch)

so pitch is rotation about the camera x axis (nodding) and yaw about the
camera y axis (head shaking).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfigurationError, InvalidInputError

_GIMBAL_EPS = 1e-7  # |cos(yaw)| below this counts as gimbal lock
_TINY_ANGLE = 1e-12


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera matrix with zero distortion."""

    matrix: np.ndarray  # 3x3
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(5))

    @property
    def fx(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def fy(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def cx(self) -> float:
        return float(self.matrix[0, 2])

    @property
    def cy(self) -> float:
        return float(self.matrix[1, 2])


@dataclass(frozen=True)
class PoseSolution:
    """Result of a PnP solve.

    ``reprojection_rms`` is the root mean square of per-point reprojection
    distances in pixels.  ``converged`` is False when the refinement hit its
    iteration cap before the step norm fell under tolerance; the pose is
    then the best one seen.
    """

    rotation_vector: np.ndarray
    translation_vector: np.ndarray
    reprojection_rms: float
    converged: bool = True


def build_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Uncalibrated-webcam approximation: fx = fy = width, principal point
    at the image center, zero distortion."""
    if width <= 0 or height <= 0:
        raise InvalidInputError(f"image dimensions must be positive, got {width}x{height}")
    f = float(width)
    k = np.array([
        [f, 0.0, width / 2.0],
        [0.0, f, height / 2.0],
        [0.0, 0.0, 1.0],
    ])
    return CameraIntrinsics(matrix=k)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_vector_to_matrix(rvec: np.ndarray) -> np.ndarray:
    """Rodrigues formula, series-safe near zero angle."""
    rvec = np.asarray(rvec, dtype=float).reshape(3)
    theta = float(np.linalg.norm(rvec))
    k = _skew(rvec)
    if theta < 1e-6:
        # sin(t)/t and (1-cos(t))/t^2 via Taylor to avoid cancellation
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    return np.eye(3) + a * k + b * (k @ k)


def matrix_to_rotation_vector(r: np.ndarray) -> np.ndarray:
    """Inverse Rodrigues via the unit quaternion, stable at all angles.

    Returns the canonical representative with angle in [0, pi].
    """
    r = np.asarray(r, dtype=float)
    t = np.trace(r)
    if t > 0:
        s = 2.0 * math.sqrt(t + 1.0)
        q = np.array([s / 4.0, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * math.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0))
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = s / 4.0
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    vec = q[1:]
    vn = float(np.linalg.norm(vec))
    if vn < _TINY_ANGLE:
        return 2.0 * vec  # angle ~ 0: rvec = 2 * axis * sin(theta/2)
    theta = 2.0 * math.atan2(vn, q[0])
    return theta * vec / vn


def euler_to_rotation_matrix(pitch_deg: float, yaw_deg: float, roll_deg: float) -> np.ndarray:
    """Compose R = Rz(roll) @ Ry(yaw) @ Rx(pitch), angles in degrees."""
    a, b, c = map(math.radians, (pitch_deg, yaw_deg, roll_deg))
    ca, sa = math.cos(a), math.sin(a)
    cb, sb = math.cos(b), math.sin(b)
    cc, sc = math.cos(c), math.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rz @ ry @ rx


def euler_to_rotation_vector(pitch_deg: float, yaw_deg: float, roll_deg: float) -> np.ndarray:
    return matrix_to_rotation_vector(euler_to_rotation_matrix(pitch_deg, yaw_deg, roll_deg))


def rotation_matrix_to_euler(r: np.ndarray) -> tuple[float, float, float]:
    """Extract (pitch, yaw, roll) in degrees under the package convention.

    At gimbal lock (|cos(yaw)| < 1e-7) roll is set to 0 and the residual
    rotation is folded into pitch, so the returned triple still reproduces
    the input matrix.
    """
    r = np.asarray(r, dtype=float)
    sy = -r[2, 0]  # sin(yaw)
    cy = math.hypot(r[0, 0], r[1, 0])  # |cos(yaw)|
    if cy < _GIMBAL_EPS:
        yaw = math.atan2(sy, cy)
        sign = 1.0 if sy >= 0 else -1.0
        pitch = math.atan2(sign * r[0, 1], sign * r[0, 2])
        roll = 0.0
    else:
        yaw = math.atan2(sy, cy)
        pitch = math.atan2(r[2, 1], r[2, 2])
        roll = math.atan2(r[1, 0], r[0, 0])
    return math.degrees(pitch), math.degrees(yaw), math.degrees(roll)


def rotation_vector_to_euler(rvec: np.ndarray) -> tuple[float, float, float]:
    """Axis-angle vector to (pitch, yaw, roll) degrees.

    Total on finite input; raises only for non-finite components.
    """
    rvec = np.asarray(rvec, dtype=float).reshape(3)
    if not np.all(np.isfinite(rvec)):
        raise InvalidInputError("rotation vector must be finite")
    return rotation_matrix_to_euler(rotation_vector_to_matrix(rvec))


def project_points(
    model_points: np.ndarray,
    rvec: np.ndarray,
    tvec: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> np.ndarray:
    """Project 3D model points to pixel coordinates under pose (rvec, tvec)."""
    r = rotation_vector_to_matrix(rvec)
    cam = np.asarray(model_points, dtype=float) @ r.T + np.asarray(tvec, dtype=float)
    z = cam[:, 2]
    uv = cam @ intrinsics.matrix.T
    return uv[:, :2] / z[:, None]


def _check_geometry(model: np.ndarray, image: np.ndarray) -> None:
    """Reject configurations that cannot determine a unique pose."""
    centered_3d = model - model.mean(axis=0)
    s3 = np.linalg.svd(centered_3d, compute_uv=False)
    if s3[0] <= 0 or s3[2] / s3[0] < 1e-9:
        raise DegenerateConfigurationError("model points are coplanar or collinear")
    centered_2d = image - image.mean(axis=0)
    s2 = np.linalg.svd(centered_2d, compute_uv=False)
    if s2[0] <= 0 or s2[1] / s2[0] < 1e-9:
        raise DegenerateConfigurationError("image points are collinear")


def _dlt_pose(model: np.ndarray, norm_xy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Direct linear transform for [R|t] from normalized image coordinates.

    Raises DegenerateConfigurationError when the linear system does not pin
    down a unique projection matrix (second-smallest singular value ~ 0).
    """
    n = model.shape[0]
    a = np.zeros((2 * n, 12))
    xh = np.hstack([model, np.ones((n, 1))])
    a[0::2, 8:12] = norm_xy[:, 0:1] * xh
    a[0::2, 0:4] = -xh
    a[1::2, 8:12] = norm_xy[:, 1:2] * xh
    a[1::2, 4:8] = -xh
    _, s, vt = np.linalg.svd(a)
    if s[0] <= 0 or s[-2] / s[0] < 1e-9:
        raise DegenerateConfigurationError(
            "correspondences do not determine a unique pose (collinear or coplanar geometry)"
        )
    p = vt[-1].reshape(3, 4)
    m, t = p[:, :3], p[:, 3]
    # fix scale and cheirality: points must sit in front of the camera
    if np.mean(model @ m[2] + t[2]) < 0:
        m, t = -m, -t
    u, sv, vt3 = np.linalg.svd(m)
    rot = u @ np.diag([1.0, 1.0, np.linalg.det(u @ vt3)]) @ vt3
    scale = float(np.mean(sv))
    if scale <= 0:
        raise DegenerateConfigurationError("degenerate projection scale")
    return matrix_to_rotation_vector(rot), t / scale


def _residuals(x: np.ndarray, model: np.ndarray, image: np.ndarray,
               intrinsics: CameraIntrinsics) -> np.ndarray:
    proj = project_points(model, x[:3], x[3:], intrinsics)
    return (proj - image).ravel()


def _numeric_jacobian(x: np.ndarray, model: np.ndarray, image: np.ndarray,
                      intrinsics: CameraIntrinsics) -> np.ndarray:
    n = x.size
    r0 = _residuals(x, model, image, intrinsics)
    jac = np.empty((r0.size, n))
    for i in range(n):
        h = 1e-7 * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (_residuals(xp, model, image, intrinsics)
                     - _residuals(xm, model, image, intrinsics)) / (2.0 * h)
    return jac


def _rms(residuals: np.ndarray) -> float:
    per_point = residuals.reshape(-1, 2)
    return float(np.sqrt(np.mean(np.sum(per_point ** 2, axis=1))))


def solve_pnp(
    model_points: np.ndarray,
    image_points: np.ndarray,
    intrinsics: CameraIntrinsics,
    *,
    max_iterations: int = 50,
    step_tolerance: float = 1e-10,
) -> PoseSolution:
    """Recover the pose minimizing the sum of squared pixel reprojection errors.

    DLT on normalized coordinates seeds a Levenberg-Marquardt refinement of
    the 6 pose parameters (Marquardt diagonal damping, so the result is
    invariant under joint uniform scaling of image points and intrinsics).
    """
    model = np.asarray(model_points, dtype=float).reshape(-1, 3)
    image = np.asarray(image_points, dtype=float).reshape(-1, 2)
    if model.shape[0] != image.shape[0]:
        raise InvalidInputError("model and image point counts differ")
    if model.shape[0] < 6:
        raise InvalidInputError("at least 6 correspondences required")
    if not (np.all(np.isfinite(model)) and np.all(np.isfinite(image))):
        raise InvalidInputError("points must be finite")
    _check_geometry(model, image)

    kinv = np.linalg.inv(intrinsics.matrix)
    ones = np.ones((image.shape[0], 1))
    norm = (np.hstack([image, ones]) @ kinv.T)[:, :2]
    rvec0, tvec0 = _dlt_pose(model, norm)

    x = np.concatenate([rvec0, tvec0])
    res = _residuals(x, model, image, intrinsics)
    cost = float(res @ res)
    best_x, best_cost = x.copy(), cost
    lam = 1e-3
    converged = False

    for _ in range(max_iterations):
        jac = _numeric_jacobian(x, model, image, intrinsics)
        grad = jac.T @ res
        hess = jac.T @ jac
        diag = np.diag(hess).copy()
        if np.any(diag <= 0):
            raise DegenerateConfigurationError("rank-deficient normal equations")
        step = None
        while lam < 1e12:
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + step
            res_new = _residuals(x_new, model, image, intrinsics)
            cost_new = float(res_new @ res_new)
            if cost_new < cost:
                x, res, cost = x_new, res_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 10.0
            step = None
        if cost < best_cost:
            best_x, best_cost = x.copy(), cost
        if step is None:
            # no improving step exists at any damping: stationary point
            converged = True
            break
        if np.linalg.norm(step) < step_tolerance:
            converged = True
            break

    final_res = _residuals(best_x, model, image, intrinsics)
    return PoseSolution(
        rotation_vector=best_x[:3].copy(),
        translation_vector=best_x[3:].copy(),
        reprojection_rms=_rms(final_res),
        converged=converged,
    )
