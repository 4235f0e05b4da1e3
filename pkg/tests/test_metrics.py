import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_pose, random_quaternion
from stereomocap.errors import NoOverlapError
from stereomocap.geometry import Pose, UnitQuaternion
from stereomocap.metrics import (
    CSV_HEADER,
    PoseSample,
    metric_report,
    orientation_error,
    orientation_errors,
    position_rmse,
    read_pose_csv,
    synchronize,
    write_pose_csv,
)


def seq(times, pose_fn=lambda t: Pose((t, 2 * t, 0.5), UnitQuaternion.from_axis_angle((0, 0, 1), t))):
    return [PoseSample(float(t), pose_fn(t)) for t in times]


def pairs_with_offset(offset_m, n=5):
    gt = seq(np.arange(n) / 30.0)
    est = [PoseSample(s.timestamp, Pose(s.pose.translation + offset_m, s.pose.rotation)) for s in gt]
    return list(zip(gt, est))


# ------------------------------------------------------------------ synchronize


def test_synchronize_identical():
    s = seq(np.arange(10) / 30.0)
    pairs = synchronize(s, s, 30.0)
    assert len(pairs) == 10
    assert all(a is b for a, b in pairs)


def test_synchronize_120_to_30():
    gt = seq(np.arange(240) / 120.0)
    est = seq(np.arange(60) / 30.0 + 0.001)
    pairs = synchronize(gt, est, 30.0)
    assert len(pairs) == 60
    for g, e in pairs:
        assert abs(g.timestamp - e.timestamp) <= 1 / 240 + 1e-12
    assert len({id(e) for _, e in pairs}) == 60


def test_synchronize_drops_gaps():
    gt = seq(np.arange(60) / 30.0)
    est = [s for k, s in enumerate(seq(np.arange(60) / 30.0)) if not 20 <= k < 30]
    pairs = synchronize(gt, est, 30.0)
    assert len(pairs) == 50


def test_synchronize_no_overlap():
    with pytest.raises(NoOverlapError):
        synchronize(seq([0.0, 0.1]), seq([0.5, 0.6]), 30.0)


def test_synchronize_rejects_bad_sequences():
    with pytest.raises(ValueError):
        synchronize([], seq([0.0]), 30.0)
    with pytest.raises(ValueError):
        synchronize(seq([0.0, 0.0]), seq([0.0]), 30.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([10.0, 30.0, 60.0]))
def test_synchronize_idempotent(seed, rate):
    rng = np.random.default_rng(seed)
    gt = seq(np.sort(rng.choice(400, 150, replace=False)) / 120.0)
    est = seq(np.sort(rng.choice(100, 40, replace=False)) / 30.0 + rng.uniform(0, 0.01))
    try:
        once = synchronize(gt, est, rate)
    except NoOverlapError:
        return
    if not once:
        return
    twice = synchronize([g for g, _ in once], [e for _, e in once], rate)
    assert [(id(g), id(e)) for g, e in twice] == [(id(g), id(e)) for g, e in once]


# ------------------------------------------------------------------ position


def test_position_rmse_zero():
    p, mean, std = position_rmse(pairs_with_offset(np.zeros(3)))
    assert p == 0.0


def test_position_rmse_pythagorean():
    p, mean, std = position_rmse(pairs_with_offset(np.array([0.03, 0.04, 0.0])))
    assert p == pytest.approx(5.0, abs=1e-12)
    np.testing.assert_allclose(mean, [3, 4, 0], atol=1e-12)
    np.testing.assert_allclose(std, 0.0, atol=1e-12)


def test_position_rmse_single_pair():
    p, _, _ = position_rmse(pairs_with_offset(np.array([0.01, 0.02, 0.02]), n=1))
    assert p == pytest.approx(3.0, abs=1e-12)


def test_position_rmse_empty():
    with pytest.raises(ValueError):
        position_rmse([])


@given(st.integers(0, 2**32 - 1))
def test_position_rmse_common_shift_invariant(seed):
    rng = np.random.default_rng(seed)
    gt = [PoseSample(k, random_pose(rng)) for k in range(6)]
    est = [PoseSample(k, random_pose(rng)) for k in range(6)]
    c = rng.normal(size=3)
    shift = lambda s: PoseSample(s.timestamp, Pose(s.pose.translation + c, s.pose.rotation))
    a, _, _ = position_rmse(list(zip(gt, est)))
    b, _, _ = position_rmse(list(zip(map(shift, gt), map(shift, est))))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-9)


# ------------------------------------------------------------------ orientation


def test_orientation_identical():
    assert orientation_error(pairs_with_offset(np.zeros(3))) == (0.0, 0.0)


@pytest.mark.parametrize("axis", [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 2, -3)])
def test_orientation_quarter_turn(axis):
    q = UnitQuaternion.from_axis_angle(axis, math.pi / 2)
    pair = (PoseSample(0, Pose((0, 0, 0), UnitQuaternion.identity())), PoseSample(0, Pose((0, 0, 0), q)))
    assert orientation_errors([pair])[0] == pytest.approx(math.pi / 4, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_orientation_sign_flip_exact(seed):
    rng = np.random.default_rng(seed)
    a, b = random_quaternion(rng), random_quaternion(rng)
    neg = -b.as_array()
    flipped = UnitQuaternion.__new__(UnitQuaternion)
    for name, v in zip("wxyz", neg):
        object.__setattr__(flipped, name, float(v))
    mk = lambda q: PoseSample(0, Pose((0, 0, 0), q))
    e1 = orientation_errors([(mk(a), mk(b))])[0]
    e2 = orientation_errors([(mk(a), mk(flipped))])[0]
    assert e1 == e2
    assert 0.0 <= e1 <= math.pi / 2


def test_metric_report_fields():
    r = metric_report(pairs_with_offset(np.array([0.03, 0.04, 0.0]), n=4))
    assert r.n == 4 and r.p_rmse == pytest.approx(5.0)
    assert r.q_err_mean == 0.0


# ------------------------------------------------------------------ CSV


def test_pose_csv_round_trip(tmp_path, rng):
    samples = [PoseSample(k / 30.0, random_pose(rng)) for k in range(20)]
    path = tmp_path / "poses.csv"
    write_pose_csv(path, samples)
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    back = read_pose_csv(path)
    for a, b in zip(samples, back):
        assert a.timestamp == b.timestamp
        np.testing.assert_array_equal(a.pose.translation, b.pose.translation)
        np.testing.assert_array_equal(a.pose.rotation.as_array(), b.pose.rotation.as_array())


def test_pose_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,x,y,z\n0,0,0,0\n")
    with pytest.raises(ValueError):
        read_pose_csv(path)
