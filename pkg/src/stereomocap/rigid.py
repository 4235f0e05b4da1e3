"""Marker labeling against the stored scalene triangle and rigid registration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .correspond import match
from .detect import DetectParams, detect
from .errors import (
    DegenerateGeometryError,
    GeometryAmbiguityError,
    MocapError,
    TooManyFeaturesError,
    TrackingError,
    TriangulationError,
    WrongCountError,
)
from .geometry import CameraModel, Pose, projection_matrix
from .scene import EDGES, Frame, MarkerGeometry
from .triangulate import TriangulationParams, triangulate

PERMUTATIONS = tuple(itertools.permutations(range(3)))
COLLINEAR_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    pose: Pose
    timestamp: float = 0.0
    registration_rmse: float = 0.0


def _edges(pts) -> np.ndarray:
    return np.array([np.linalg.norm(pts[a] - pts[b]) for a, b in EDGES])


def match_geometry(points, geometry: MarkerGeometry, ambiguity_margin: float = 1e-6) -> tuple[int, int, int]:
    """Label observed points against the stored triangle.

    Returns ``perm`` such that ``points[perm[k]]`` is marker ``k``. Every
    permutation is scored by the summed squared edge-length mismatch; the
    winner must beat the runner-up by ``ambiguity_margin`` (m^2) and must
    put the observed longest edge on the stored longest edge.
    """
    pts = np.asarray(points, dtype=float).reshape(3, 3)
    obs_len = max(_edges(pts))
    if np.linalg.norm(np.cross(pts[1] - pts[0], pts[2] - pts[0])) < COLLINEAR_TOL * obs_len**2:
        raise DegenerateGeometryError("observed points are (nearly) collinear")
    ref = geometry.edges
    scores = [float(np.sum((_edges(pts[list(p)]) - ref) ** 2)) for p in PERMUTATIONS]
    order = np.argsort(scores, kind="stable")
    best, second = scores[order[0]], scores[order[1]]
    if second - best < ambiguity_margin:
        raise GeometryAmbiguityError(f"best labeling score {best:.3g} vs runner-up {second:.3g}")
    perm = PERMUTATIONS[order[0]]
    if np.argmax(_edges(pts[list(perm)])) != np.argmax(ref):
        raise GeometryAmbiguityError("best labeling does not align the longest edges")
    return perm


def fit_rigid_transform(model, observed) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares ``R, t`` with ``observed ~ R @ model + t`` (Arun/Kabsch).

    Works for ``N >= 3`` corresponded points; the determinant correction
    keeps ``R`` a proper rotation.
    """
    A = np.asarray(model, dtype=float)
    B = np.asarray(observed, dtype=float)
    ca, cb = A.mean(axis=0), B.mean(axis=0)
    H = (A - ca).T @ (B - cb)
    U, s, Vt = np.linalg.svd(H)
    if s[1] <= 1e-12 * max(s[0], 1e-300):
        raise DegenerateGeometryError(f"cross-covariance rank < 2 (singular values {s})")
    V = Vt.T
    d = np.sign(np.linalg.det(V @ U.T)) or 1.0
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    return R, cb - R @ ca


def register(points, geometry: MarkerGeometry, timestamp: float = 0.0) -> PoseEstimate:
    """Target pose from observed marker positions listed in geometry order."""
    obs = np.asarray(points, dtype=float).reshape(3, 3)
    R, t = fit_rigid_transform(geometry.points, obs)
    resid = geometry.points @ R.T + t - obs
    rmse = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return PoseEstimate(Pose.from_matrix(R, t), timestamp, rmse)


@dataclass(frozen=True)
class TrackParams:
    detect: DetectParams = field(default_factory=DetectParams)
    triangulation: TriangulationParams = field(default_factory=TriangulationParams)
    ambiguity_margin: float = 1e-6


def track_frame_pair(
    left: Frame,
    right: Frame,
    rig: tuple[CameraModel, CameraModel],
    geometry: MarkerGeometry,
    params: TrackParams = TrackParams(),
) -> PoseEstimate:
    """Full per-frame pipeline: detect, correspond, triangulate, label, register.

    Every failure is re-raised as :class:`TrackingError` carrying its stage.
    """
    cam_l, cam_r = rig
    try:
        feats_l = detect(left, params.detect)
        feats_r = detect(right, params.detect)
    except TooManyFeaturesError as exc:
        raise TrackingError("detection", exc) from exc
    if min(len(feats_l), len(feats_r)) < 3:
        err = WrongCountError(f"detected {len(feats_l)} left / {len(feats_r)} right features; need 3")
        raise TrackingError("detection", err)
    try:
        corr = match(feats_l, feats_r)
    except MocapError as exc:
        raise TrackingError("correspondence", exc) from exc
    if len(corr.pairs) != 3:
        raise TrackingError("correspondence", WrongCountError(f"{len(corr.pairs)} corresponded pairs; need 3"))

    P_l, P_r = projection_matrix(cam_l), projection_matrix(cam_r)
    try:
        pts = np.array(
            [triangulate(feats_l[i].center, feats_r[j].center, P_l, P_r, params.triangulation) for i, j in corr.pairs]
        )
    except TriangulationError as exc:
        raise TrackingError("triangulation", exc) from exc
    try:
        perm = match_geometry(pts, geometry, params.ambiguity_margin)
    except MocapError as exc:
        raise TrackingError("geometry", exc) from exc
    try:
        return register(pts[list(perm)], geometry, left.timestamp)
    except MocapError as exc:
        raise TrackingError("registration", exc) from exc
