import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stereomocap.errors import BehindCameraError
from stereomocap.geometry import (
    CameraModel,
    Pose,
    UnitQuaternion,
    apply_projection,
    compose,
    focal_from_fov,
    invert,
    project,
    projection_matrix,
    quaternion_distance,
    stereo_rig,
    transform_point,
)

from conftest import random_pose, random_quaternion

seeds = st.integers(0, 2**32 - 1)


def test_optical_axis_projects_to_principal_point():
    cam = CameraModel(300.0, 310.0, 321.5, 239.25, 640, 480)
    for z in (0.1, 1.0, 37.0):
        np.testing.assert_array_equal(project((0, 0, z), cam), [321.5, 239.25])


def test_focal_from_fov_brute_force_angle():
    f = focal_from_fov(640, math.radians(100.0))
    assert f == pytest.approx(320.0 / math.tan(math.radians(50.0)), rel=1e-15)
    assert f == pytest.approx(268.51, abs=0.01)
    # a ray at 50 deg off axis must land on the image edge
    cam = CameraModel(f, f, 320.0, 240.0, 640, 480)
    u, _ = project((math.sin(math.radians(50.0)), 0.0, math.cos(math.radians(50.0))), cam)
    assert u == pytest.approx(640.0, abs=1e-9)


def test_project_hand_value():
    cam = CameraModel(500.0, 500.0, 320.0, 240.0, 640, 480)
    assert project((0.1, 0.0, 1.0), cam)[0] == pytest.approx(370.0, abs=1e-12)


def test_behind_camera_raises():
    cam = CameraModel(500.0, 500.0, 320.0, 240.0, 640, 480)
    with pytest.raises(BehindCameraError):
        project((0.0, 0.0, -1.0), cam)
    with pytest.raises(BehindCameraError):
        project((1.0, 0.0, 0.0), cam)


def test_projection_matrix_unit_intrinsics():
    cam = CameraModel(1.0, 1.0, 0.0, 0.0, 2, 2)
    np.testing.assert_array_equal(projection_matrix(cam), np.hstack([np.eye(3), np.zeros((3, 1))]))


def test_projection_matrix_baseline_offset():
    b = 0.1
    left, right = stereo_rig(baseline=b)
    u, v = apply_projection(projection_matrix(right), (0.0, 0.0, 1.0))
    assert u == pytest.approx(right.cx - right.fx * b, abs=1e-12)
    assert v == pytest.approx(right.cy, abs=1e-12)


@given(seeds)
def test_projection_matrix_agrees_with_project(seed):
    rng = np.random.default_rng(seed)
    cam = CameraModel(
        rng.uniform(100, 1000), rng.uniform(100, 1000), rng.uniform(0, 639), rng.uniform(0, 479), 640, 480,
        random_pose(rng, 0.2),
    )
    P = projection_matrix(cam)
    for _ in range(20):
        Xc = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.2, 5.0)])
        X = transform_point(cam.extrinsics, Xc)
        a, b = project(X, cam), apply_projection(P, X)
        np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12 * np.abs(a).max())


def test_invert_identity():
    inv = invert(Pose.identity())
    np.testing.assert_array_equal(inv.translation, 0.0)
    assert quaternion_distance(inv.rotation, UnitQuaternion.identity()) == 0.0


def test_compose_translations_sum():
    a, b = Pose((1.0, 2.0, 3.0)), Pose((-0.5, 4.0, 0.25))
    np.testing.assert_array_equal(compose(a, b).translation, [0.5, 6.0, 3.25])


@given(seeds)
def test_compose_invert_round_trip(seed):
    a = random_pose(np.random.default_rng(seed))
    for ident in (compose(a, invert(a)), compose(invert(a), a)):
        assert np.max(np.abs(ident.translation)) < 1e-12
        assert quaternion_distance(ident.rotation, UnitQuaternion.identity()) < 1e-12 or ident.rotation.w >= 1 - 1e-15


@given(seeds)
def test_transform_composition(seed):
    rng = np.random.default_rng(seed)
    a, b, p = random_pose(rng), random_pose(rng), rng.normal(size=3)
    np.testing.assert_allclose(
        transform_point(compose(a, b), p), transform_point(a, transform_point(b, p)), atol=1e-12
    )


@given(seeds)
def test_canonicalization_idempotent_and_action_preserving(seed):
    rng = np.random.default_rng(seed)
    raw = rng.normal(size=4)
    q = UnitQuaternion.from_array(raw)
    assert q.w >= 0
    assert abs(np.linalg.norm(q.as_array()) - 1.0) < 1e-9
    assert UnitQuaternion.from_array(q.as_array()) == q
    assert UnitQuaternion.from_array(-raw) == q
    # rotation action of the raw (non-canonical) quaternion, by the sandwich formula
    w, x, y, z = raw / np.linalg.norm(raw)
    v = rng.normal(size=3)
    u = np.array([x, y, z])
    t = 2 * np.cross(u, v)
    np.testing.assert_allclose(q.rotate(v), v + w * t + np.cross(u, t), atol=1e-12)


def test_canonical_sign_when_scalar_is_zero():
    q = UnitQuaternion(0.0, -1.0, 0.0, 0.0)
    assert (q.w, q.x) == (0.0, 1.0)
    assert UnitQuaternion(q.w, q.x, q.y, q.z) == q


@given(seeds)
def test_matrix_round_trip(seed):
    q = random_quaternion(np.random.default_rng(seed))
    R = q.as_matrix()
    np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert quaternion_distance(UnitQuaternion.from_matrix(R), q) < 1e-7


def test_camera_invariants():
    with pytest.raises(ValueError):
        CameraModel(0.0, 1.0, 1.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        CameraModel(1.0, 1.0, 10.0, 1.0, 10, 10)
