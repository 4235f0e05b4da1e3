"""Two-view triangulation by iteratively reweighted linear least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, IllConditionedError, TriangulationError

SINGULAR_GAP_TOL = 1e-12


@dataclass(frozen=True)
class TriangulationParams:
    max_iterations: int = 10
    weight_tolerance: float = 1e-8

    def __post_init__(self):
        if self.max_iterations < 1 or self.weight_tolerance <= 0:
            raise ValueError(f"invalid triangulation params: {self}")


def _dlt_rows(px, P) -> np.ndarray:
    u, v = px
    return np.array([u * P[2] - P[0], v * P[2] - P[1]])


def _null_vector(A: np.ndarray) -> np.ndarray:
    _, s, Vt = np.linalg.svd(A)
    if s[-2] - s[-1] <= SINGULAR_GAP_TOL * s[0]:
        raise IllConditionedError(f"null space is not one-dimensional (singular values {s})")
    X = Vt[-1]
    if abs(X[3]) <= np.finfo(float).eps * np.linalg.norm(X):
        raise TriangulationError("point at infinity")
    return X / X[3]


def triangulate(left_px, right_px, P_left, P_right, params: TriangulationParams = TriangulationParams(), full_output: bool = False):
    """Triangulate one point from a corresponded pixel pair.

    Each camera contributes the rows ``u p3 - p1`` and ``v p3 - p2``. After
    the plain DLT solve, each camera's rows are divided by its projective
    depth ``p3 . X`` from the previous estimate and the system is re-solved,
    until both depths change by less than ``weight_tolerance`` (relative) or
    ``max_iterations`` solves have been done.

    Returns the rig-frame point, or ``(point, n_solves)`` with
    ``full_output=True``.
    """
    PL = np.asarray(P_left, dtype=float)
    PR = np.asarray(P_right, dtype=float)
    rows = (_dlt_rows(left_px, PL), _dlt_rows(right_px, PR))
    # sign(det M) * p3.X is positive in front of the camera for any scaling of P
    signs = np.sign([np.linalg.det(PL[:, :3]), np.linalg.det(PR[:, :3])])

    def projective_depths(X):
        return signs * np.array([PL[2] @ X, PR[2] @ X])

    X = _null_vector(np.vstack(rows))
    depths = projective_depths(X)
    n = 1
    while n < params.max_iterations:
        if np.any(depths <= 0):
            raise DivergenceError(f"non-positive projective depth {depths}")
        X = _null_vector(np.vstack([rows[0] / depths[0], rows[1] / depths[1]]))
        n += 1
        new = projective_depths(X)
        converged = np.all(np.abs(new - depths) <= params.weight_tolerance * np.abs(depths))
        depths = new
        if converged:
            break
    if np.any(depths <= 0):
        raise DivergenceError(f"non-positive projective depth {depths}")
    return (X[:3], n) if full_output else X[:3]


def triangulate_many(left_px, right_px, P_left, P_right, params: TriangulationParams = TriangulationParams()) -> np.ndarray:
    return np.array([triangulate(l, r, P_left, P_right, params) for l, r in zip(left_px, right_px)])
