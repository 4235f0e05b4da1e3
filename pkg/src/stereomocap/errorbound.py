"""Monte-Carlo propagation of pixel-level error through triangulation and registration.

These routines bypass rendering and detection: they perturb the exact
marker projections directly, so they serve as an independent yardstick for
what the full pipeline can achieve.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .geometry import CameraModel, projection_matrix, stereo_rig
from .rigid import register
from .scene import (
    MarkerGeometry,
    TrialTrajectory,
    default_geometry,
    exact_feature_centers,
    relative_target_pose,
    rig_pose_at,
    target_pose_world,
)
from .triangulate import triangulate


def position_error_samples(
    distance: float,
    yaw: float = 0.0,
    rig: Optional[tuple[CameraModel, CameraModel]] = None,
    geometry: Optional[MarkerGeometry] = None,
    half_width: float = 0.5,
    n_samples: int = 2000,
    seed: int = 0,
) -> np.ndarray:
    """Target translation errors (cm) under uniform ``+-half_width`` px center error.

    Each sample jitters both coordinates of every marker center in both
    cameras independently, triangulates with known labels and registers.
    """
    left, right = rig or stereo_rig()
    geometry = geometry or default_geometry()
    traj = TrialTrajectory("static", distance=distance, yaw=yaw)
    rig_pose, target = rig_pose_at(traj, 0.0), target_pose_world()
    truth = relative_target_pose(target, rig_pose).translation
    cl = exact_feature_centers(geometry, target, rig_pose, left)
    cr = exact_feature_centers(geometry, target, rig_pose, right)
    PL, PR = projection_matrix(left), projection_matrix(right)
    rng = np.random.default_rng(seed)
    errs = np.empty(n_samples)
    for k in range(n_samples):
        jl = cl + rng.uniform(-half_width, half_width, cl.shape)
        jr = cr + rng.uniform(-half_width, half_width, cr.shape)
        pts = np.array([triangulate(a, b, PL, PR) for a, b in zip(jl, jr)])
        errs[k] = 100.0 * np.linalg.norm(register(pts, geometry).pose.translation - truth)
    return errs


def quantization_bound(distance: float, yaw: float = 0.0, **kw) -> float:
    """Largest sampled target position error (cm) for half-pixel center error."""
    return float(position_error_samples(distance, yaw, **kw).max())


def depth_error_curve(
    distances: Sequence[float],
    half_width: float = 0.25,
    baseline: float = 0.10,
    n_samples: int = 2000,
    seed: int = 0,
) -> np.ndarray:
    """RMS triangulated error (m) of a single on-axis point at each distance."""
    left, right = stereo_rig(baseline)
    PL, PR = projection_matrix(left), projection_matrix(right)
    rng = np.random.default_rng(seed)
    out = []
    for d in distances:
        X = np.array([baseline / 2.0, 0.0, d])
        ul, ur = PL @ np.append(X, 1.0), PR @ np.append(X, 1.0)
        ul, ur = ul[:2] / ul[2], ur[:2] / ur[2]
        e = [
            np.linalg.norm(
                triangulate(ul + rng.uniform(-half_width, half_width, 2), ur + rng.uniform(-half_width, half_width, 2), PL, PR)
                - X
            )
            for _ in range(n_samples)
        ]
        out.append(np.sqrt(np.mean(np.square(e))))
    return np.array(out)
