"""Position RMSE and quaternion orientation error over synchronized sequences."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NoOverlapError
from .geometry import Pose, UnitQuaternion, quaternion_distance

CSV_HEADER = ("timestamp", "tx", "ty", "tz", "qw", "qx", "qy", "qz")


@dataclass(frozen=True, eq=False)
class PoseSample:
    timestamp: float
    pose: Pose


@dataclass(frozen=True)
class MetricReport:
    """Position errors in cm, orientation errors in rad."""

    p_rmse: float
    mean_axis_error: tuple[float, float, float]
    std_axis_error: tuple[float, float, float]
    q_err_mean: float
    q_err_std: float
    n: int


def _check_increasing(seq: Sequence[PoseSample], name: str) -> np.ndarray:
    t = np.array([s.timestamp for s in seq], dtype=float)
    if t.size == 0:
        raise ValueError(f"{name} sequence is empty")
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"{name} timestamps must be strictly increasing")
    return t


def _nearest(times: np.ndarray, t: float) -> int:
    k = int(np.searchsorted(times, t))
    if k == 0:
        return 0
    if k == len(times):
        return k - 1
    return k - 1 if t - times[k - 1] <= times[k] - t else k


def synchronize(
    ground_truth: Sequence[PoseSample],
    estimates: Sequence[PoseSample],
    rate: float,
    max_skew: Optional[float] = None,
) -> list[tuple[PoseSample, PoseSample]]:
    """Resample both sequences on a common ``rate`` grid by nearest timestamp.

    Grid instants are the multiples of ``1 / rate`` lying within ``max_skew``
    (default: half a grid period) of the overlap of the two sequences. An
    instant is dropped when its nearest sample in either sequence is further
    than ``max_skew`` away, so gaps in the estimates do not get filled by
    stale poses, and each sample is paired at most once. Anchoring the grid to absolute time makes the operation
    idempotent for the default skew.
    """
    tg = _check_increasing(ground_truth, "ground truth")
    te = _check_increasing(estimates, "estimate")
    start, end = max(tg[0], te[0]), min(tg[-1], te[-1])
    if start > end:
        raise NoOverlapError(f"sequences do not overlap ([{tg[0]}, {tg[-1]}] vs [{te[0]}, {te[-1]}])")
    if max_skew is None:
        max_skew = 0.5 / rate
    eps = 1e-9 / rate
    k0 = math.ceil((start - max_skew - eps) * rate)
    k1 = math.floor((end + max_skew + eps) * rate)
    pairs, last_i, last_j = [], -1, -1
    for k in range(k0, k1 + 1):
        t = k / rate
        i, j = _nearest(tg, t), _nearest(te, t)
        if abs(tg[i] - t) > max_skew + eps or abs(te[j] - t) > max_skew + eps:
            continue
        if i == last_i or j == last_j:  # a sample halfway between two instants serves only the first
            continue
        last_i, last_j = i, j
        pairs.append((ground_truth[i], estimates[j]))
    return pairs


def position_errors(pairs) -> np.ndarray:
    """Per-pair signed translation errors (estimate minus ground truth), meters."""
    return np.array([est.pose.translation - gt.pose.translation for gt, est in pairs]).reshape(-1, 3)


def position_rmse(pairs) -> tuple[float, np.ndarray, np.ndarray]:
    """``(p_rmse, per-axis mean, per-axis std)``, all in centimeters."""
    if len(pairs) == 0:
        raise ValueError("no pairs")
    d = position_errors(pairs) * 100.0
    p = math.sqrt(float(np.sum(d * d)) / len(d))
    return p, d.mean(axis=0), d.std(axis=0)


def orientation_errors(pairs) -> np.ndarray:
    return np.array([quaternion_distance(gt.pose.rotation, est.pose.rotation) for gt, est in pairs])


def orientation_error(pairs) -> tuple[float, float]:
    """Mean and standard deviation of ``arccos(|q_gt . q_est|)`` in radians."""
    if len(pairs) == 0:
        raise ValueError("no pairs")
    e = orientation_errors(pairs)
    return float(e.mean()), float(e.std())


def metric_report(pairs) -> MetricReport:
    p, mean, std = position_rmse(pairs)
    qm, qs = orientation_error(pairs)
    return MetricReport(p, tuple(float(x) for x in mean), tuple(float(x) for x in std), qm, qs, len(pairs))


def write_pose_csv(path, samples: Sequence[PoseSample]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for s in samples:
            q = s.pose.rotation
            w.writerow([repr(float(v)) for v in (s.timestamp, *s.pose.translation, q.w, q.x, q.y, q.z)])


def read_pose_csv(path) -> list[PoseSample]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        return [
            PoseSample(
                float(r["timestamp"]),
                Pose(
                    (float(r["tx"]), float(r["ty"]), float(r["tz"])),
                    UnitQuaternion(float(r["qw"]), float(r["qx"]), float(r["qy"]), float(r["qz"])),
                ),
            )
            for r in reader
        ]
