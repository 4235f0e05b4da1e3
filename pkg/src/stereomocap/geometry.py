"""Rigid transforms, unit quaternions and the pinhole camera model.

Conventions
-----------
* Points are plain ``numpy`` arrays of shape ``(3,)`` (meters); pixels are
  arrays of shape ``(2,)`` holding ``(u, v)``. Pixel ``(u, v)`` addresses
  column ``u`` and row ``v``; integer coordinates are pixel centers.
* Camera frames are x right, y down, z forward (optical axis).
* The rig frame coincides with the left camera frame, so the left camera's
  extrinsics are the identity.
* A :class:`Pose` ``T`` maps points from its child frame into its parent
  frame: ``p_parent = R @ p_child + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError

def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite values: {arr}")
    arr.setflags(write=False)
    return arr


def as_point(p) -> np.ndarray:
    """Coerce ``p`` to a finite float array of shape (3,)."""
    return _frozen(p, (3,))


def as_pixel(p) -> np.ndarray:
    return _frozen(p, (2,))


@dataclass(frozen=True)
class UnitQuaternion:
    """Rotation stored as ``(w, x, y, z)``.

    Construction normalizes and picks the double-cover representative with
    ``w >= 0``. When ``w == 0`` exactly, the first nonzero vector component
    is made positive so that canonicalization stays idempotent.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        q = np.array([self.w, self.x, self.y, self.z], dtype=float)
        if not np.all(np.isfinite(q)):
            raise ValueError("quaternion components must be finite")
        n = np.linalg.norm(q)
        if n == 0.0:
            raise ValueError("zero quaternion")
        if abs(n - 1.0) > 4 * np.finfo(float).eps:
            q = q / n
        lead = q[0] if q[0] != 0.0 else q[np.flatnonzero(q)[0]]
        if lead < 0.0:
            q = -q
        for name, value in zip("wxyz", q):
            object.__setattr__(self, name, float(value))

    @classmethod
    def identity(cls) -> UnitQuaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, q) -> UnitQuaternion:
        w, x, y, z = np.asarray(q, dtype=float).reshape(4)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> UnitQuaternion:
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = math.sin(angle / 2.0)
        return cls(math.cos(angle / 2.0), *(s * axis))

    @classmethod
    def from_matrix(cls, R) -> UnitQuaternion:
        """Shepperd's method; picks the numerically largest pivot."""
        R = np.asarray(R, dtype=float)
        tr = np.trace(R)
        diag = np.diag(R)
        k = int(np.argmax([tr, *diag]))
        if k == 0:
            s = math.sqrt(1.0 + tr) * 2.0
            q = (0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s)
        elif k == 1:
            s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
            q = ((R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s)
        elif k == 2:
            s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
            q = ((R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s)
        else:
            s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
            q = ((R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s)
        return cls(*q)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def conjugate(self) -> UnitQuaternion:
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: UnitQuaternion) -> UnitQuaternion:
        a1, b1, c1, d1 = self.w, self.x, self.y, self.z
        a2, b2, c2, d2 = other.w, other.x, other.y, other.z
        return UnitQuaternion(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )

    def rotate(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        u = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(u, v)
        return v + self.w * t + np.cross(u, t)


def quaternion_distance(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """``arccos(|a . b|)``, in ``[0, pi/2]``; half the relative rotation angle."""
    d = abs(float(np.dot(a.as_array(), b.as_array())))
    return math.acos(min(1.0, d))


@dataclass(frozen=True, eq=False)
class Pose:
    translation: np.ndarray = field(default_factory=lambda: as_point((0.0, 0.0, 0.0)))
    rotation: UnitQuaternion = field(default_factory=UnitQuaternion.identity)

    def __post_init__(self):
        object.__setattr__(self, "translation", as_point(self.translation))
        if not isinstance(self.rotation, UnitQuaternion):
            raise TypeError("rotation must be a UnitQuaternion")

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_matrix(cls, R, t) -> Pose:
        return cls(t, UnitQuaternion.from_matrix(R))

    def matrix(self) -> np.ndarray:
        """4x4 homogeneous transform."""
        T = np.eye(4)
        T[:3, :3] = self.rotation.as_matrix()
        T[:3, 3] = self.translation
        return T


def compose(a: Pose, b: Pose) -> Pose:
    """Pose of ``b``'s child frame in ``a``'s parent frame (``a`` after ``b``)."""
    return Pose(a.translation + a.rotation.rotate(b.translation), a.rotation * b.rotation)


def invert(a: Pose) -> Pose:
    q = a.rotation.conjugate()
    return Pose(-q.rotate(a.translation), q)


def transform_point(a: Pose, p) -> np.ndarray:
    return a.rotation.rotate(p) + a.translation


def transform_points(a: Pose, pts) -> np.ndarray:
    """Vectorized :func:`transform_point` for an ``(N, 3)`` array."""
    pts = np.asarray(pts, dtype=float)
    return pts @ a.rotation.as_matrix().T + a.translation


@dataclass(frozen=True)
class CameraModel:
    """Ideal pinhole camera. ``extrinsics`` is the camera pose in the rig frame."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image size must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def rig_to_camera(self) -> Pose:
        return invert(self.extrinsics)


def focal_from_fov(width: int, hfov: float) -> float:
    """Focal length in pixels for a horizontal field of view ``hfov`` (rad)."""
    return (width / 2.0) / math.tan(hfov / 2.0)


def stereo_rig(
    baseline: float = 0.10,
    width: int = 640,
    height: int = 480,
    hfov: float = math.radians(100.0),
) -> tuple[CameraModel, CameraModel]:
    """Left/right camera pair with the right camera offset along rig +x."""
    f = focal_from_fov(width, hfov)
    left = CameraModel(f, f, width / 2.0, height / 2.0, width, height)
    right = CameraModel(f, f, width / 2.0, height / 2.0, width, height, Pose((baseline, 0.0, 0.0)))
    return left, right


def to_camera(point, camera: CameraModel) -> np.ndarray:
    return transform_point(camera.rig_to_camera(), point)


def project(point, camera: CameraModel) -> np.ndarray:
    """Pinhole projection of a rig-frame point.

    Raises :class:`BehindCameraError` when the point has non-positive depth.
    """
    X, Y, Z = to_camera(point, camera)
    if Z <= 0.0:
        raise BehindCameraError(f"point has depth {Z:.6g} m in camera frame")
    return np.array([camera.fx * X / Z + camera.cx, camera.fy * Y / Z + camera.cy])


def projection_matrix(camera: CameraModel) -> np.ndarray:
    """``P = K [R | t]`` mapping homogeneous rig points to homogeneous pixels."""
    T = camera.rig_to_camera().matrix()
    return camera.K @ T[:3, :]


def apply_projection(P, point) -> np.ndarray:
    """Dehomogenized ``P @ [X; 1]``."""
    h = np.asarray(P) @ np.append(np.asarray(point, dtype=float), 1.0)
    return h[:2] / h[2]
