import dataclasses
import json

import pytest

from stereomocap import cli
from stereomocap.bench import (
    STAGES,
    RigPerturbation,
    TrialConfig,
    TrialReport,
    builtin_matrices,
    load_config,
    repetition_seed,
    run_matrix,
    run_trial,
)
from stereomocap.errorbound import quantization_bound
from stereomocap.scene import NoiseSpec, TrialTrajectory, read_pgm


def shorten(configs, duration=0.2, repetitions=1):
    return [
        dataclasses.replace(c, trajectory=dataclasses.replace(c.trajectory, duration=duration), repetitions=repetitions)
        for c in configs
    ]


def test_builtin_matrix_shapes():
    m = builtin_matrices()
    assert [(len(m[k]), {c.repetitions for c in m[k]}) for k in ("static", "angular", "linear")] == [
        (12, {30}),
        (4, {30}),
        (4, {5}),
    ]
    assert {(c.trajectory.distance, c.trajectory.yaw) for c in m["static"]} == {
        (d, a) for d in (0.9, 1.34, 1.78, 2.23) for a in (0.0, 0.17, -0.34)
    }
    assert [c.trajectory.angular_velocity for c in m["angular"]] == [0.05, 0.1, 0.2, 0.4]
    assert [c.trajectory.linear_velocity for c in m["linear"]] == [0.10, 0.20, 0.25, 0.30]


def test_static_trial_noise_free_beats_bound():
    cfg = TrialConfig(TrialTrajectory("static", distance=0.9, duration=0.5))
    r = run_trial(cfg)
    assert r.successes == r.frames_processed == 15
    assert r.metrics.p_rmse < quantization_bound(0.9, 0.0, n_samples=300)


def test_angular_trial_report_shape():
    cfg = TrialConfig(TrialTrajectory("angular", angular_velocity=0.4, duration=0.3))
    r = run_trial(cfg)
    d = r.to_dict()
    assert set(d["metrics"]) == {"p_rmse", "mean_axis_error", "std_axis_error", "q_err_mean", "q_err_std", "n"}
    assert "wall_clock_s" not in d and "wall_clock_s" in r.to_dict(timing=True)


def test_run_trial_deterministic():
    cfg = TrialConfig(TrialTrajectory("static", distance=1.34, duration=0.2), NoiseSpec(0.15, rng_seed=9), repetitions=3)
    assert run_trial(cfg).to_dict() == run_trial(cfg).to_dict()


def test_repetition_seeds_distinct():
    assert len({repetition_seed(0, r) for r in range(30)}) == 30


def test_failure_accounting_balances():
    noisy = NoiseSpec(pixel_noise_sigma=0.3, rng_seed=1)
    r = run_trial(TrialConfig(TrialTrajectory("static", distance=2.23, duration=0.2), noisy, repetitions=2))
    assert r.frames_processed == r.successes + sum(r.failures.values())
    assert set(r.failures) == set(STAGES)
    with pytest.raises(ValueError):
        TrialReport({}, None, dict.fromkeys(STAGES, 0), 3, 2)


def test_perturbation_leaves_tracker_calibration_alone():
    base = TrialConfig(TrialTrajectory("static", distance=0.9, duration=0.1))
    bent = dataclasses.replace(base, perturbation=RigPerturbation(yaw=0.01))
    assert run_trial(bent).metrics.p_rmse > run_trial(base).metrics.p_rmse


def test_run_matrix_rows(tmp_path):
    m = builtin_matrices(noise_sigma=0.0)
    csv_path, json_path = run_matrix(shorten(m["static"], 0.1), tmp_path)
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 13
    assert lines[0].startswith("d_m,a_rad,p_rmse_cm")
    assert len(json.loads(json_path.read_text())["trials"]) == 12
    csv_path, _ = run_matrix(shorten(m["linear"], 0.1), tmp_path)
    assert len(csv_path.read_text().splitlines()) == 5
    assert csv_path.read_text().splitlines()[0].startswith("l_vel_cm_s,")


def test_run_matrix_rejects_empty_and_mixed(tmp_path):
    with pytest.raises(ValueError):
        run_matrix([], tmp_path)
    m = builtin_matrices()
    with pytest.raises(ValueError):
        run_matrix([m["static"][0], m["linear"][0]], tmp_path)


def test_dump_frames(tmp_path):
    run_matrix(shorten(builtin_matrices()["angular"][:1], 0.1), tmp_path, dump_frames=True)
    left = read_pgm(tmp_path / "frames" / "angular_00" / "left.pgm")
    assert left.shape == (480, 640)


def test_load_config_defaults_and_overrides(tmp_path):
    sets = load_config()
    assert set(sets) == {"static", "angular", "linear"}
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "matrix": "static",
                "seed": 4,
                "repetitions": 2,
                "noise": {"pixel_noise_sigma": 0.05},
                "detect": {"min_area": 6},
                "rig": {"baseline": 0.2, "hfov_deg": 90},
                "perturbation": {"yaw": 0.001},
            }
        )
    )
    (static,) = load_config(path).values()
    c = static[0]
    assert (len(static), c.repetitions, c.noise.rng_seed, c.noise.pixel_noise_sigma) == (12, 2, 4, 0.05)
    assert c.detect.min_area == 6
    assert c.rig[1].extrinsics.translation[0] == pytest.approx(0.2)
    assert load_config(path, seed=8)["static"][0].noise.rng_seed == 8


def test_load_config_custom_trials():
    sets = load_config(data={"trials": [{"kind": "static", "distance": 1.5, "duration": 0.5}]})
    assert list(sets) == ["custom"] and sets["custom"][0].trajectory.n_frames == 15


@pytest.mark.parametrize(
    "data", [{"bogus": 1}, {"matrix": "circular"}, {"detect": {"min_area": -1}}, {"noise": {"sigma": 1}}]
)
def test_load_config_errors(data):
    with pytest.raises(ValueError):
        load_config(data=data)


def small_config(tmp_path, **extra):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"trials": [{"kind": "static", "distance": 0.9, "duration": 0.2}], "repetitions": 2, **extra}))
    return path


def test_cli_run_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", str(small_config(tmp_path)), "--out", str(out), "--timing"]) == 0
    assert (out / "custom.csv").exists() and (out / "custom_timing.json").exists()
    capsys.readouterr()
    assert cli.main(["report", "--in", str(out), "--format", "markdown"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("### custom") and "| d_m | a_rad |" in text
    assert cli.main(["report", "--in", str(out)]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("d_m,a_rad")


def test_cli_byte_identical(tmp_path):
    cfg = small_config(tmp_path)
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / d), "--seed", "3"]) == 0
    for f in ("custom.csv", "custom.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) != 0
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) != 0
    assert cli.main(["report", "--in", str(tmp_path / "empty")]) != 0
    with pytest.raises(SystemExit):
        cli.main(["run"])


def test_load_config_mixed_custom_kinds():
    sets = load_config(
        data={"trials": [{"kind": "linear", "linear_velocity": 0.2}, {"kind": "static"}, {"kind": "linear", "linear_velocity": 0.1}]}
    )
    assert list(sets) == ["custom_static", "custom_linear"]
    assert [c.trajectory.linear_velocity for c in sets["custom_linear"]] == [0.2, 0.1]
