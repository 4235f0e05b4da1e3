"""Synthetic stereo scenes: marker targets, trial trajectories and frame rendering.

World frame: the target plate sits at the origin and the rig looks at it
along world +z. The rig origin is the left camera (see
:mod:`stereomocap.geometry`), placed at ``(0, 0, -distance)`` and yawed about
world y by the trial angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import (
    CameraModel,
    Pose,
    UnitQuaternion,
    compose,
    invert,
    project,
    transform_point,
    transform_points,
)

DEFAULT_EXPOSURE = 500e-6
DEFAULT_SUBSAMPLES = 8

# Plate layout of the three markers (meters, in the plate plane).
_DEFAULT_LAYOUT = ((-0.07, 0.05, 0.0), (0.08, 0.03, 0.0), (-0.02, -0.07, 0.0))


def _edge_lengths(pts: np.ndarray) -> np.ndarray:
    """Lengths of edges (0,1), (1,2), (0,2)."""
    return np.array(
        [
            np.linalg.norm(pts[0] - pts[1]),
            np.linalg.norm(pts[1] - pts[2]),
            np.linalg.norm(pts[0] - pts[2]),
        ]
    )


EDGES = ((0, 1), (1, 2), (0, 2))


@dataclass(frozen=True, eq=False)
class MarkerGeometry:
    """Three coplanar marker centers in the target body frame."""

    points: np.ndarray
    marker_radius: float = 0.015
    scalene_margin: float = 0.005

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(3, 3)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.marker_radius <= 0:
            raise ValueError("marker_radius must be positive")
        e = np.sort(self.edges)
        if np.min(np.diff(e)) < self.scalene_margin:
            raise ValueError(f"edges {e} are not scalene by margin {self.scalene_margin}")
        area2 = np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0]))
        if area2 < 1e-9 * e[-1] ** 2:
            raise ValueError("marker points are collinear")

    @property
    def edges(self) -> np.ndarray:
        return _edge_lengths(self.points)

    @classmethod
    def from_layout(cls, layout, **kw) -> MarkerGeometry:
        """Re-express ``layout`` in the canonical body frame.

        Origin at the centroid, x toward the first endpoint of the longest
        edge, z along the triangle normal ``(p1 - p0) x (p2 - p0)``.
        """
        pts = np.asarray(layout, dtype=float).reshape(3, 3)
        c = pts.mean(axis=0)
        a, _ = EDGES[int(np.argmax(_edge_lengths(pts)))]
        z = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        z /= np.linalg.norm(z)
        x = pts[a] - c
        x -= z * np.dot(x, z)
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.stack([x, y, z])
        return cls((pts - c) @ R.T, **kw)


def default_geometry() -> MarkerGeometry:
    """Asymmetric 3-marker plate with 30 mm markers; edge margins ~10 mm."""
    return MarkerGeometry.from_layout(_DEFAULT_LAYOUT)


@dataclass(frozen=True)
class NoiseSpec:
    pixel_noise_sigma: float = 0.0
    spurious_blob_rate: float = 0.0
    spurious_blob_radius_range: tuple[float, float] = (1.0, 3.0)
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.spurious_blob_radius_range
        if min(self.pixel_noise_sigma, self.spurious_blob_rate, lo, hi, self.rng_seed) < 0 or lo > hi:
            raise ValueError(f"invalid noise spec: {self}")


@dataclass(frozen=True)
class TrialTrajectory:
    """Rig motion for one trial.

    ``static`` holds ``distance``/``yaw``. ``angular`` sweeps yaw at
    ``angular_velocity`` through ``sweep_range`` centered on zero at
    ``distance``. ``linear`` moves from ``start_distance`` to
    ``end_distance`` at ``linear_velocity`` with ``yaw`` fixed. Moving kinds
    reverse at the ends (back and forth) when ``duration`` exceeds one pass;
    by default ``duration`` is exactly one pass (2 s for static).
    """

    kind: str
    duration: Optional[float] = None
    frame_rate: float = 30.0
    distance: float = 1.0
    yaw: float = 0.0
    angular_velocity: Optional[float] = None
    linear_velocity: Optional[float] = None
    start_distance: float = 0.9
    end_distance: float = 2.2
    sweep_range: float = math.radians(40.0)

    def __post_init__(self):
        if self.kind not in ("static", "angular", "linear"):
            raise ValueError(f"unsupported trajectory kind {self.kind!r}")
        if self.kind == "angular" and not (self.angular_velocity and self.angular_velocity > 0):
            raise ValueError("angular trajectory needs a positive angular_velocity")
        if self.kind == "linear" and not (self.linear_velocity and self.linear_velocity > 0):
            raise ValueError("linear trajectory needs a positive linear_velocity")
        if self.duration is None:
            object.__setattr__(self, "duration", self.single_pass_duration())
        if not (self.duration > 0 and self.frame_rate > 0):
            raise ValueError("duration and frame_rate must be positive")

    def single_pass_duration(self) -> float:
        if self.kind == "angular":
            return self.sweep_range / self.angular_velocity
        if self.kind == "linear":
            return abs(self.end_distance - self.start_distance) / self.linear_velocity
        return 2.0

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))


def _ping_pong(s: float, length: float) -> float:
    phase = math.fmod(s, 2.0 * length)
    return phase if phase <= length else 2.0 * length - phase


def rig_pose_at(traj: TrialTrajectory, t: float) -> Pose:
    """World pose of the rig (left camera) at time ``t``."""
    distance, yaw = traj.distance, traj.yaw
    if traj.kind == "angular":
        yaw = -traj.sweep_range / 2.0 + _ping_pong(traj.angular_velocity * t, traj.sweep_range)
    elif traj.kind == "linear":
        span = traj.end_distance - traj.start_distance
        step = _ping_pong(traj.linear_velocity * t, abs(span))
        distance = traj.start_distance + math.copysign(step, span)
    return Pose((0.0, 0.0, -distance), UnitQuaternion.from_axis_angle((0.0, 1.0, 0.0), yaw))


def target_pose_world() -> Pose:
    """The plate at the world origin, normal facing the rig (body z = world -z)."""
    return Pose((0.0, 0.0, 0.0), UnitQuaternion.from_axis_angle((1.0, 0.0, 0.0), math.pi))


def sample_trajectory(traj: TrialTrajectory) -> list[tuple[float, Pose]]:
    """``(timestamp, rig pose)`` at ``1/frame_rate`` spacing from ``t = 0``."""
    return [(k / traj.frame_rate, rig_pose_at(traj, k / traj.frame_rate)) for k in range(traj.n_frames)]


def relative_target_pose(target_pose: Pose, rig_pose: Pose) -> Pose:
    """Ground-truth target pose expressed in the rig frame."""
    return compose(invert(rig_pose), target_pose)


def exact_feature_centers(
    geometry: MarkerGeometry, target_pose: Pose, rig_pose: Pose, camera: CameraModel
) -> np.ndarray:
    """Continuous projections of the marker centers, shape ``(3, 2)``."""
    in_rig = relative_target_pose(target_pose, rig_pose)
    return np.array([project(transform_point(in_rig, p), camera) for p in geometry.points])


@dataclass(frozen=True, eq=False)
class Frame:
    intensities: np.ndarray
    timestamp: float = 0.0
    exposure: float = DEFAULT_EXPOSURE

    def __post_init__(self):
        img = np.asarray(self.intensities, dtype=float)
        if img.ndim != 2 or img.size == 0:
            raise ValueError("intensities must be a non-empty 2-D array")
        if img.min() < 0.0 or img.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        if self.exposure <= 0:
            raise ValueError("exposure must be positive")
        object.__setattr__(self, "intensities", img)

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    @property
    def width(self) -> int:
        return self.intensities.shape[1]


def _disc_window(shape, u: float, v: float, r: float):
    """Bounding slices and coverage mask of a disc; ``None`` if fully outside."""
    h, w = shape
    u0, u1 = max(0, math.floor(u - r)), min(w - 1, math.ceil(u + r))
    v0, v1 = max(0, math.floor(v - r)), min(h - 1, math.ceil(v + r))
    if u0 > u1 or v0 > v1:
        return None
    uu = np.arange(u0, u1 + 1) - u
    vv = np.arange(v0, v1 + 1)[:, None] - v
    return (slice(v0, v1 + 1), slice(u0, u1 + 1)), uu * uu + vv * vv <= r * r


def _paint_disc(mask: np.ndarray, u: float, v: float, r: float) -> None:
    win = _disc_window(mask.shape, u, v, r)
    if win is not None:
        mask[win[0]] |= win[1]


def _marker_discs(geometry: MarkerGeometry, target_pose: Pose, rig_pose: Pose, camera: CameraModel):
    """``(u, v, radius)`` per marker in front of the camera."""
    cam_from_world = compose(camera.rig_to_camera(), invert(rig_pose))
    world = transform_points(target_pose, geometry.points)
    out = []
    for X, Y, Z in transform_points(cam_from_world, world):
        if Z > 0.0:
            out.append((camera.fx * X / Z + camera.cx, camera.fy * Y / Z + camera.cy, camera.fx * geometry.marker_radius / Z))
    return out


def rasterize_markers(
    geometry: MarkerGeometry, target_pose: Pose, rig_pose: Pose, camera: CameraModel
) -> np.ndarray:
    """Binary-coverage discs for one instant; markers behind the camera are skipped."""
    mask = np.zeros((camera.height, camera.width), dtype=bool)
    for u, v, r in _marker_discs(geometry, target_pose, rig_pose, camera):
        _paint_disc(mask, u, v, r)
    return mask


def frame_rng(seed: int, frame_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, frame_index, stream])


def render_frame(
    geometry: MarkerGeometry,
    target_pose_at: Callable[[float], Pose],
    rig_pose_at: Callable[[float], Pose],
    camera: CameraModel,
    timestamp: float,
    exposure: float = DEFAULT_EXPOSURE,
    noise: NoiseSpec = NoiseSpec(),
    *,
    n_sub: int = DEFAULT_SUBSAMPLES,
    frame_index: int = 0,
    stream: int = 0,
) -> Frame:
    """Render one exposure of the marker plate.

    Motion blur is the mean of ``n_sub`` binary rasterizations at evenly
    spaced instants inside ``[timestamp, timestamp + exposure]``. Spurious
    blobs and Gaussian pixel noise are drawn from an RNG seeded by
    ``(noise.rng_seed, frame_index, stream)``, so frames can be rendered in
    any order (use a distinct ``stream`` per camera).
    """
    if exposure <= 0:
        raise ValueError("exposure must be positive")
    shape = (camera.height, camera.width)
    acc = np.zeros(shape, dtype=np.int32)
    # Last sub-exposure that covered each pixel; overlapping discs count once.
    stamp = np.full(shape, -1, dtype=np.int32)
    for k in range(n_sub):
        t = timestamp + exposure * (k + 0.5) / n_sub
        for u, v, r in _marker_discs(geometry, target_pose_at(t), rig_pose_at(t), camera):
            win = _disc_window(shape, u, v, r)
            if win is None:
                continue
            sl, disc = win
            new = disc & (stamp[sl] != k)
            acc[sl] += new
            stamp[sl][new] = k
    img = acc / n_sub

    rng = frame_rng(noise.rng_seed, frame_index, stream)
    n_blobs = rng.poisson(noise.spurious_blob_rate)
    if n_blobs:
        blobs = np.zeros_like(img, dtype=bool)
        lo, hi = noise.spurious_blob_radius_range
        for u, v, r in zip(
            rng.uniform(0, camera.width, n_blobs),
            rng.uniform(0, camera.height, n_blobs),
            rng.uniform(lo, hi, n_blobs),
        ):
            _paint_disc(blobs, u, v, r)
        img[blobs] = 1.0
    if noise.pixel_noise_sigma > 0:
        img = np.clip(img + rng.normal(0.0, noise.pixel_noise_sigma, img.shape), 0.0, 1.0)
    return Frame(img, timestamp, exposure)


@dataclass(frozen=True)
class StereoScene:
    """Everything needed to render a trial besides the trajectory."""

    geometry: MarkerGeometry = field(default_factory=default_geometry)
    left: CameraModel = None
    right: CameraModel = None
    exposure: float = DEFAULT_EXPOSURE
    n_sub: int = DEFAULT_SUBSAMPLES
    noise: NoiseSpec = NoiseSpec()

    def __post_init__(self):
        if self.left is None or self.right is None:
            from .geometry import stereo_rig

            left, right = stereo_rig()
            object.__setattr__(self, "left", self.left or left)
            object.__setattr__(self, "right", self.right or right)


def render_stereo_pair(
    scene: StereoScene,
    traj: TrialTrajectory,
    frame_index: int,
    render_cameras: Optional[Sequence[CameraModel]] = None,
) -> tuple[Frame, Frame]:
    """Left/right frames for ``frame_index``.

    ``render_cameras`` overrides the cameras used for rendering (e.g. with
    perturbed extrinsics) while the pipeline keeps the nominal ones.
    """
    left, right = render_cameras or (scene.left, scene.right)
    t = frame_index / traj.frame_rate
    target = target_pose_world()
    frames = []
    for stream, cam in enumerate((left, right)):
        frames.append(
            render_frame(
                scene.geometry,
                lambda _t: target,
                lambda s: rig_pose_at(traj, s),
                cam,
                t,
                scene.exposure,
                scene.noise,
                n_sub=scene.n_sub,
                frame_index=frame_index,
                stream=stream,
            )
        )
    return frames[0], frames[1]


def write_pgm(path, image) -> None:
    """Write an 8-bit binary (P5) graymap. Floats in [0, 1] or bools."""
    img = np.asarray(image)
    if img.dtype == bool:
        data = img.astype(np.uint8) * 255
    else:
        data = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P5 graymap written by :func:`write_pgm`; returns floats in [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos)
            continue
        end = pos
        while not raw[end : end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    data = np.frombuffer(raw[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    return data.reshape(h, w) / float(maxval)
