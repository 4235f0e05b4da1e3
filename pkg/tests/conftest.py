import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stereomocap.errors import BehindCameraError
from stereomocap.geometry import Pose, UnitQuaternion, compose, invert, stereo_rig, to_camera, transform_point
from stereomocap.scene import EDGES, TrialTrajectory, exact_feature_centers, rig_pose_at, target_pose_world

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_KEY = pytest.StashKey[list]()


def random_quaternion(rng) -> UnitQuaternion:
    return UnitQuaternion.from_array(rng.normal(size=4))


def random_pose(rng, scale=1.0) -> Pose:
    return Pose(rng.normal(scale=scale, size=3), random_quaternion(rng))


def random_valid_view(rng, geometry):
    """Random target pose whose markers image at 2-50 px radius, > 4 radii apart, fully inside the frame."""
    left, right = stereo_rig()
    while True:
        d = rng.uniform(0.15, 2.0)
        rig_pose = rig_pose_at(TrialTrajectory("static", distance=d, yaw=rng.uniform(-0.5, 0.5)), 0.0)
        tilt = UnitQuaternion.from_axis_angle(rng.normal(size=3), rng.uniform(0.0, 0.6))
        target = compose(target_pose_world(), Pose(rng.uniform(-0.3, 0.3, 3) * d, tilt))
        cam = left if rng.random() < 0.5 else right
        try:
            centers = exact_feature_centers(geometry, target, rig_pose, cam)
        except BehindCameraError:
            continue
        rel = compose(invert(rig_pose), target)
        depth = np.array([to_camera(transform_point(rel, p), cam)[2] for p in geometry.points])
        radii = cam.fx * geometry.marker_radius / depth
        sep = min(np.linalg.norm(centers[i] - centers[j]) for i, j in EDGES)
        m = radii.max() + 2
        inside = np.all((centers > m) & (centers < [cam.width - m, cam.height - m]))
        if radii.min() >= 2 and radii.max() <= 50 and sep > 4 * radii.max() and inside:
            return target, rig_pose, cam, centers


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok, detail):
        lines.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
