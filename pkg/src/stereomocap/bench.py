"""Trial matrices over simulated scenes and their table/sidecar outputs."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .detect import DetectParams
from .errors import TrackingError
from .geometry import CameraModel, Pose, UnitQuaternion, compose, stereo_rig
from .metrics import MetricReport, PoseSample, metric_report, synchronize
from .rigid import TrackParams, track_frame_pair
from .scene import (
    DEFAULT_EXPOSURE,
    DEFAULT_SUBSAMPLES,
    MarkerGeometry,
    NoiseSpec,
    StereoScene,
    TrialTrajectory,
    default_geometry,
    relative_target_pose,
    render_stereo_pair,
    rig_pose_at,
    target_pose_world,
    write_pgm,
)
from .triangulate import TriangulationParams

log = logging.getLogger(__name__)

STAGES = TrackingError.STAGES
MATRIX_NAMES = ("static", "angular", "linear")

# Reference trial grids: rig distances (m), yaws (rad), speeds (rad/s, m/s).
STATIC_DISTANCES = (0.9, 1.34, 1.78, 2.23)
STATIC_YAWS = (0.0, 0.17, -0.34)
ANGULAR_VELOCITIES = (0.05, 0.1, 0.2, 0.4)
ANGULAR_DISTANCE = 1.0
LINEAR_VELOCITIES = (0.10, 0.20, 0.25, 0.30)
REPETITIONS = {"static": 30, "angular": 30, "linear": 5}
DEFAULT_NOISE_SIGMA = 0.15


@dataclass(frozen=True)
class RigPerturbation:
    """Error applied to the right camera used for *rendering* only.

    The tracker keeps the nominal calibration, so this models stereo
    calibration error.
    """

    yaw: float = 0.0
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def apply(self, camera: CameraModel) -> CameraModel:
        if self.yaw == 0.0 and not any(self.translation):
            return camera
        delta = Pose(self.translation, UnitQuaternion.from_axis_angle((0.0, 1.0, 0.0), self.yaw))
        return dataclasses.replace(camera, extrinsics=compose(camera.extrinsics, delta))


@dataclass(frozen=True)
class TrialConfig:
    trajectory: TrialTrajectory
    noise: NoiseSpec = NoiseSpec()
    detect: DetectParams = DetectParams()
    triangulation: TriangulationParams = TriangulationParams()
    geometry: MarkerGeometry = field(default_factory=default_geometry, compare=False)
    rig: tuple[CameraModel, CameraModel] = field(default_factory=stereo_rig, compare=False)
    repetitions: int = 1
    exposure: float = DEFAULT_EXPOSURE
    n_sub: int = DEFAULT_SUBSAMPLES
    perturbation: RigPerturbation = RigPerturbation()
    gt_jitter: float = 0.0  # m, isotropic Gaussian on ground-truth translation

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.gt_jitter < 0:
            raise ValueError("gt_jitter must be nonnegative")

    def summary(self) -> dict[str, Any]:
        t = self.trajectory
        out: dict[str, Any] = {"kind": t.kind, "duration_s": t.duration, "frame_rate_hz": t.frame_rate}
        if t.kind == "static":
            out.update(distance_m=t.distance, yaw_rad=t.yaw)
        elif t.kind == "angular":
            out.update(distance_m=t.distance, angular_velocity_rad_s=t.angular_velocity)
        else:
            out.update(linear_velocity_cm_s=round(t.linear_velocity * 100.0, 6), start_m=t.start_distance, end_m=t.end_distance)
        out.update(repetitions=self.repetitions, pixel_noise_sigma=self.noise.pixel_noise_sigma, seed=self.noise.rng_seed)
        return out


@dataclass
class TrialReport:
    config: dict[str, Any]
    metrics: Optional[MetricReport]
    failures: dict[str, int]
    frames_processed: int
    successes: int
    wall_clock_s: float = 0.0
    mean_latency_ms: float = 0.0

    def __post_init__(self):
        if self.frames_processed != self.successes + sum(self.failures.values()):
            raise ValueError("failure accounting does not balance")

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        d = {
            "config": self.config,
            "metrics": dataclasses.asdict(self.metrics) if self.metrics else None,
            "failures": dict(self.failures),
            "frames_processed": self.frames_processed,
            "successes": self.successes,
        }
        if timing:
            d.update(wall_clock_s=self.wall_clock_s, mean_latency_ms=self.mean_latency_ms)
        return d


def repetition_seed(base_seed: int, repetition: int) -> int:
    return int(np.random.SeedSequence([base_seed, repetition]).generate_state(1)[0])


def builtin_matrices(seed: int = 0, noise_sigma: float = DEFAULT_NOISE_SIGMA, repetitions: Optional[dict] = None) -> dict[str, list[TrialConfig]]:
    """The static, angular and linear trial sets with their repetition counts.

    Static yaws are 0, 0.17 and -0.34 rad (about 0, 10 and -20 degrees).
    """
    reps = {**REPETITIONS, **(repetitions or {})}
    noise = NoiseSpec(pixel_noise_sigma=noise_sigma, rng_seed=seed)
    return {
        "static": [
            TrialConfig(TrialTrajectory("static", distance=d, yaw=a), noise, repetitions=reps["static"])
            for d in STATIC_DISTANCES
            for a in STATIC_YAWS
        ],
        "angular": [
            TrialConfig(TrialTrajectory("angular", distance=ANGULAR_DISTANCE, angular_velocity=w), noise, repetitions=reps["angular"])
            for w in ANGULAR_VELOCITIES
        ],
        "linear": [
            TrialConfig(TrialTrajectory("linear", linear_velocity=v), noise, repetitions=reps["linear"])
            for v in LINEAR_VELOCITIES
        ],
    }


@dataclass
class _RepResult:
    pairs: list
    failures: dict[str, int]
    frames: int
    latency_s: float


def _run_repetition(config: TrialConfig, rep: int, dump_dir: Optional[Path] = None) -> _RepResult:
    traj = config.trajectory
    noise = dataclasses.replace(config.noise, rng_seed=repetition_seed(config.noise.rng_seed, rep))
    left, right = config.rig
    scene = StereoScene(config.geometry, left, right, config.exposure, config.n_sub, noise)
    render_cams = (left, config.perturbation.apply(right))
    params = TrackParams(config.detect, config.triangulation)
    target = target_pose_world()
    jitter_rng = np.random.default_rng([noise.rng_seed, 0x6A17])

    gt, est = [], []
    failures = dict.fromkeys(STAGES, 0)
    latency = 0.0
    for k in range(traj.n_frames):
        t = k / traj.frame_rate
        truth = relative_target_pose(target, rig_pose_at(traj, t))
        if config.gt_jitter > 0:
            truth = Pose(truth.translation + jitter_rng.normal(0.0, config.gt_jitter, 3), truth.rotation)
        gt.append(PoseSample(t, truth))
        fl, fr = render_stereo_pair(scene, traj, k, render_cams)
        if dump_dir is not None and k == 0:
            write_pgm(dump_dir / "left.pgm", fl.intensities)
            write_pgm(dump_dir / "right.pgm", fr.intensities)
        t0 = time.perf_counter()
        try:
            pe = track_frame_pair(fl, fr, (left, right), config.geometry, params)
        except TrackingError as exc:
            failures[exc.stage] += 1
            continue
        finally:
            latency += time.perf_counter() - t0
        est.append(PoseSample(t, pe.pose))
    pairs = synchronize(gt, est, traj.frame_rate) if est else []
    return _RepResult(pairs, failures, traj.n_frames, latency)


def _assemble(config: TrialConfig, results: Sequence[_RepResult], wall: float) -> TrialReport:
    pairs = [p for r in results for p in r.pairs]
    failures = dict.fromkeys(STAGES, 0)
    for r in results:
        for s, n in r.failures.items():
            failures[s] += n
    frames = sum(r.frames for r in results)
    return TrialReport(
        config=config.summary(),
        metrics=metric_report(pairs) if pairs else None,
        failures=failures,
        frames_processed=frames,
        successes=frames - sum(failures.values()),
        wall_clock_s=wall,
        mean_latency_ms=1e3 * sum(r.latency_s for r in results) / max(frames, 1),
    )


def run_trial(config: TrialConfig, dump_dir: Optional[Path] = None) -> TrialReport:
    """Render, track and score every repetition of one configuration.

    Repetition ``r`` reseeds the noise from ``(noise.rng_seed, r)``. Per-frame
    pipeline failures are tallied by stage. Metrics pool the synchronized
    samples of all repetitions.
    """
    t0 = time.perf_counter()
    results = []
    for rep in range(config.repetitions):
        d = None
        if dump_dir is not None and rep == 0:
            d = Path(dump_dir)
            d.mkdir(parents=True, exist_ok=True)
        results.append(_run_repetition(config, rep, d))
    return _assemble(config, results, time.perf_counter() - t0)


def _task(args):
    config, rep, dump = args
    return _run_repetition(config, rep, dump)


def run_configs(configs: Sequence[TrialConfig], jobs: int = 1, dump_root: Optional[Path] = None, prefix: str = "") -> list[TrialReport]:
    """Run several configurations; reports come back in input order."""
    tasks = []
    for i, cfg in enumerate(configs):
        for rep in range(cfg.repetitions):
            dump = None
            if dump_root is not None and rep == 0:
                dump = Path(dump_root) / f"{prefix}{i:02d}"
                dump.mkdir(parents=True, exist_ok=True)
            tasks.append((cfg, rep, dump))
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    wall = time.perf_counter() - t0
    reports, k = [], 0
    for cfg in configs:
        chunk = results[k : k + cfg.repetitions]
        k += cfg.repetitions
        reports.append(_assemble(cfg, chunk, wall * len(chunk) / max(len(results), 1)))
    return reports


def _param_columns(kind: str) -> tuple[str, ...]:
    return {
        "static": ("d_m", "a_rad"),
        "angular": ("a_vel_rad_s",),
        "linear": ("l_vel_cm_s",),
    }[kind]


METRIC_COLUMNS = (
    "p_rmse_cm",
    "x_cm",
    "x_std_cm",
    "y_cm",
    "y_std_cm",
    "z_cm",
    "z_std_cm",
    "q_err_rad",
    "q_err_std_rad",
    "n",
    "frames",
    *(f"fail_{s}" for s in STAGES),
)


def _fmt(x: Optional[float], digits: int = 4) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{digits}f}"


def table_rows(reports: Sequence[TrialReport]) -> tuple[list[str], list[list[str]]]:
    """Header and formatted rows for a set of reports of the same kind."""
    kind = reports[0].config["kind"]
    header = [*_param_columns(kind), *METRIC_COLUMNS]
    rows = []
    for r in reports:
        c = r.config
        params = {
            "static": lambda: [_fmt(c["distance_m"], 2), _fmt(c["yaw_rad"], 2)],
            "angular": lambda: [_fmt(c["angular_velocity_rad_s"], 2)],
            "linear": lambda: [_fmt(c["linear_velocity_cm_s"], 0)],
        }[kind]()
        m = r.metrics
        if m is None:
            metrics = [""] * 9 + ["0"]
        else:
            metrics = [
                _fmt(m.p_rmse),
                _fmt(m.mean_axis_error[0]),
                _fmt(m.std_axis_error[0]),
                _fmt(m.mean_axis_error[1]),
                _fmt(m.std_axis_error[1]),
                _fmt(m.mean_axis_error[2]),
                _fmt(m.std_axis_error[2]),
                _fmt(m.q_err_mean),
                _fmt(m.q_err_std),
                str(m.n),
            ]
        rows.append([*params, *metrics, str(r.frames_processed), *(str(r.failures[s]) for s in STAGES)])
    return header, rows


def run_matrix(
    configs: Sequence[TrialConfig],
    out_dir,
    name: Optional[str] = None,
    jobs: int = 1,
    dump_frames: bool = False,
    timing: bool = False,
) -> tuple[Path, Path]:
    """Run ``configs`` and write ``<name>.csv`` plus a ``<name>.json`` sidecar.

    Outputs are deterministic for a fixed config and seed; wall-clock
    figures only go to ``<name>_timing.json`` when ``timing`` is set.
    """
    if not configs:
        raise ValueError("run_matrix needs at least one config")
    kinds = {c.trajectory.kind for c in configs}
    if len(kinds) != 1:
        raise ValueError(f"a matrix must hold one trajectory kind, got {sorted(kinds)}")
    name = name or kinds.pop()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    dump_root = out / "frames" if dump_frames else None
    reports = run_configs(configs, jobs=jobs, dump_root=dump_root, prefix=f"{name}_")

    header, rows = table_rows(reports)
    csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
    try:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        with open(json_path, "w") as f:
            json.dump({"matrix": name, "trials": [r.to_dict() for r in reports]}, f, indent=2, sort_keys=True)
            f.write("\n")
        if timing:
            with open(out / f"{name}_timing.json", "w") as f:
                json.dump([r.to_dict(timing=True) for r in reports], f, indent=2, sort_keys=True)
    except OSError as exc:
        raise OSError(f"writing results to {out}: {exc}") from exc
    return csv_path, json_path


# ---------------------------------------------------------------- config files


def _build(cls, raw: Optional[dict], **extra):
    raw = dict(raw or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for k, v in list(raw.items()):
        if isinstance(v, list):
            raw[k] = tuple(v)
    raw.update(extra)
    return cls(**raw)


def load_config(path=None, data: Optional[dict] = None, matrix: Optional[str] = None, seed: Optional[int] = None) -> dict[str, list[TrialConfig]]:
    """Parse a run config into named trial sets.

    The JSON file may hold ``matrix`` (a builtin name or a list of them),
    ``seed``, ``repetitions`` (int or per-matrix dict), and overrides for
    ``noise``, ``detect``, ``triangulation``, ``rig`` (``baseline``,
    ``width``, ``height``, ``hfov_deg``), ``geometry`` (``layout``,
    ``marker_radius``, ``scalene_margin``), ``exposure``, ``n_sub``,
    ``perturbation`` and ``gt_jitter``. ``trials`` lists custom trajectory
    dicts, run as a matrix named ``custom`` (``custom_<kind>`` per kind when
    kinds are mixed). CLI ``matrix``/``seed`` win over
    the file.
    """
    if data is None:
        if path is None:
            data = {}
        else:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ValueError(f"cannot read config {path}: {exc}") from exc
    known = {
        "matrix", "seed", "repetitions", "noise", "detect", "triangulation", "rig", "geometry",
        "exposure", "n_sub", "perturbation", "gt_jitter", "trials",
    }
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    seed = int(data.get("seed", 0) if seed is None else seed)
    noise = _build(NoiseSpec, {"pixel_noise_sigma": DEFAULT_NOISE_SIGMA, **data.get("noise", {})}, rng_seed=seed)
    detect = _build(DetectParams, data.get("detect"))
    tri = _build(TriangulationParams, data.get("triangulation"))
    rig_raw = dict(data.get("rig", {}))
    if "hfov_deg" in rig_raw:
        rig_raw["hfov"] = math.radians(rig_raw.pop("hfov_deg"))
    rig = stereo_rig(**rig_raw)
    geo_raw = dict(data.get("geometry", {}))
    layout = geo_raw.pop("layout", None)
    geometry = MarkerGeometry.from_layout(layout, **geo_raw) if layout else default_geometry()
    if geo_raw and not layout:
        geometry = MarkerGeometry(geometry.points, **geo_raw)
    pert = _build(RigPerturbation, data.get("perturbation"))
    common = dict(
        noise=noise,
        detect=detect,
        triangulation=tri,
        geometry=geometry,
        rig=rig,
        exposure=float(data.get("exposure", DEFAULT_EXPOSURE)),
        n_sub=int(data.get("n_sub", DEFAULT_SUBSAMPLES)),
        perturbation=pert,
        gt_jitter=float(data.get("gt_jitter", 0.0)),
    )

    reps_raw = data.get("repetitions")
    if isinstance(reps_raw, int):
        reps = dict.fromkeys(MATRIX_NAMES, reps_raw)
    else:
        reps = {**REPETITIONS, **(reps_raw or {})}

    sets: dict[str, list[TrialConfig]] = {}
    if "trials" in data and matrix is None:
        n_rep = int(reps_raw if isinstance(reps_raw, int) else 1)
        custom = [TrialConfig(_build(TrialTrajectory, t), repetitions=n_rep, **common) for t in data["trials"]]
        kinds = [k for k in MATRIX_NAMES if any(c.trajectory.kind == k for c in custom)]
        for k in kinds:
            name = "custom" if len(kinds) == 1 else f"custom_{k}"
            sets[name] = [c for c in custom if c.trajectory.kind == k]
    names = matrix or data.get("matrix")
    if names is None and not sets:
        names = list(MATRIX_NAMES)
    if isinstance(names, str):
        names = [names]
    builtin = builtin_matrices(seed, noise.pixel_noise_sigma, reps)
    for n in names or []:
        if n not in builtin:
            raise ValueError(f"unknown matrix {n!r}; choose from {MATRIX_NAMES}")
        sets[n] = [dataclasses.replace(c, **common) for c in builtin[n]]
    return sets


def render_report(in_dir, fmt: str = "csv") -> str:
    """Re-render the JSON sidecars in ``in_dir`` as CSV or markdown tables."""
    in_dir = Path(in_dir)
    sidecars = sorted(p for p in in_dir.glob("*.json") if not p.name.endswith("_timing.json"))
    if not sidecars:
        raise FileNotFoundError(f"no result sidecars in {in_dir}")
    out = io.StringIO()
    for p in sidecars:
        doc = json.loads(p.read_text())
        reports = [
            TrialReport(
                config=t["config"],
                metrics=MetricReport(**{k: tuple(v) if isinstance(v, list) else v for k, v in t["metrics"].items()}) if t["metrics"] else None,
                failures=t["failures"],
                frames_processed=t["frames_processed"],
                successes=t["successes"],
            )
            for t in doc["trials"]
        ]
        header, rows = table_rows(reports)
        if fmt == "markdown":
            out.write(f"### {doc['matrix']}\n\n")
            out.write("| " + " | ".join(header) + " |\n")
            out.write("|" + "---|" * len(header) + "\n")
            for r in rows:
                out.write("| " + " | ".join(r) + " |\n")
            out.write("\n")
        elif fmt == "csv":
            out.write(f"# {doc['matrix']}\n")
            w = csv.writer(out, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    return out.getvalue()
