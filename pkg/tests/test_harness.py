import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ckfdist import harness
from ckfdist.cli import main
from ckfdist.harness import (SUMMARY_COLUMNS, TRIAL_COLUMNS, ExperimentConfig, ResultRow, run_sweep,
                             run_trial, sweep_cells)
from ckfdist.simulate import SIGMA_DIST_SWEEP

GOLDEN = Path(__file__).parent / "data" / "golden_trials.csv"
GOLDEN_CONFIG = dict(presets=["walk", "jog"], sigmas=[0.0, 0.1], seeds=[0], duration=3.0)


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(sigmas=[-0.1])
    with pytest.raises(ValueError):
        ExperimentConfig(presets=[])
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=[])
    with pytest.raises(ValueError):
        ExperimentConfig(presets=["moonwalk"])
    with pytest.raises(ValueError):
        ExperimentConfig(modes=["fancy"])
    with pytest.raises(ValueError):
        ExperimentConfig(noise={"bogus": 1.0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"sigma": [0.1]})


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig(presets=["jog"], sigmas=[0.0, 0.2], seeds=[1, 2], noise={"zupt_var": 1e-6},
                           rom=[0, 150], policy="reject")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = ExperimentConfig.from_json(path)
    assert back == cfg
    assert back.noise_model().zupt_var == 1e-6
    assert back.ckf_config("distance", back.body_dims()).rom == pytest.approx((0, np.deg2rad(150)))


def test_cell_count():
    cfg = ExperimentConfig(presets=["walk", "high_knee"], sigmas=list(SIGMA_DIST_SWEEP), seeds=range(5))
    cells = sweep_cells(cfg)
    assert sum(c[1] == "distance" for c in cells) == 130
    assert sum(c[1] == "baseline" for c in cells) == 10


@pytest.fixture(scope="module")
def short_cfg():
    return ExperimentConfig(presets=["walk"], sigmas=[0.0], seeds=[0], duration=8.0)


def test_exact_distances_beat_baseline(short_cfg):
    trial = short_cfg.simulate("walk", 0.0, 0)
    dist = run_trial(short_cfg, trial, "distance").row.metrics
    base = run_trial(short_cfg, trial, "baseline").row.metrics
    for side in ("left", "right"):
        assert dist[f"rmse_knee_{side}_y"] < base[f"rmse_knee_{side}_y"]


def test_baseline_ignores_sigma(short_cfg):
    a = run_trial(short_cfg, short_cfg.simulate("walk", 0.0, 0), "baseline")
    b = run_trial(short_cfg, short_cfg.simulate("walk", 0.2, 0), "baseline")
    assert a.states.tobytes() == b.states.tobytes()
    assert a.row.csv_record() == b.row.csv_record()


def test_run_trial_deterministic(short_cfg):
    trial = short_cfg.simulate("walk", 0.1, 0)
    a = run_trial(short_cfg, trial, "distance").row
    b = run_trial(short_cfg, trial, "distance").row
    assert a.csv_record() == b.csv_record()
    assert all(v >= 0 for k, v in a.metrics.items() if k.startswith("rmse_"))
    assert all(-1 <= v <= 1 for k, v in a.metrics.items() if k.startswith("cc_"))


def test_single_cell_sweep_matches_run_trial(tmp_path):
    cfg = ExperimentConfig(presets=["walk"], modes=["distance"], sigmas=[0.05], seeds=[2], duration=4.0,
                           out_dir=str(tmp_path))
    res = run_sweep(cfg)
    direct = run_trial(cfg, cfg.simulate("walk", 0.05, 2), "distance").row
    assert [r.csv_record() for r in res.rows] == [direct.csv_record()]
    summary = _read(tmp_path / "summary.csv")[0]
    assert float(summary["rmse_knee_left_y_mean"]) == pytest.approx(direct.metrics["rmse_knee_left_y"])
    assert summary["n_ok"] == "1"


def test_summary_is_mean_of_rows(tmp_path):
    cfg = ExperimentConfig(presets=["walk"], sigmas=[0.1], seeds=[0, 1, 2], duration=3.0,
                           out_dir=str(tmp_path))
    run_sweep(cfg)
    rows = _read(tmp_path / "trials.csv")
    summary = _read(tmp_path / "summary.csv")
    assert [tuple(r) for r in (rows[0].keys(), summary[0].keys())] == [TRIAL_COLUMNS, SUMMARY_COLUMNS]
    for s in summary:
        members = [r for r in rows if r["mode"] == s["mode"] and r["sigma_dist"] == s["sigma_dist"]]
        assert len(members) == 3
        for col in ("rmse_knee_right_y", "cc_hip_left_x", "ttd_left"):
            vals = [float(r[col]) for r in members]
            assert float(s[col + "_mean"]) == pytest.approx(sum(vals) / 3, rel=1e-9)
            # the table holds 10 significant digits, so CC values near 1 carry ~1e-10 rounding
            assert float(s[col + "_std"]) == pytest.approx(np.std(vals), rel=1e-6, abs=1e-9)
    timing = _read(tmp_path / "timing.csv")
    assert len(timing) == 6 and all(float(t["runtime_s"]) > 0 for t in timing)


def test_failed_cells_are_recorded(tmp_path, monkeypatch):
    real = harness.run_trial

    def flaky(config, trial, mode=None):
        if trial.meta["seed"] == 1:
            raise RuntimeError("sensor dropout")
        return real(config, trial, mode)

    monkeypatch.setattr(harness, "run_trial", flaky)
    cfg = ExperimentConfig(presets=["walk"], modes=["distance"], sigmas=[0.1], seeds=[0, 1],
                           duration=2.0, out_dir=str(tmp_path))
    res = run_sweep(cfg)
    assert res.n_failed == 1
    rows = _read(tmp_path / "trials.csv")
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert rows[1]["error"] == "RuntimeError: sensor dropout"
    assert rows[1]["rmse_knee_left_y"] == "nan"
    summary = _read(tmp_path / "summary.csv")[0]
    assert (summary["n_ok"], summary["n_failed"]) == ("1", "1")


def test_worker_count(monkeypatch):
    monkeypatch.delenv(harness.WORKERS_ENV, raising=False)
    assert ExperimentConfig().worker_count() == 1
    assert ExperimentConfig(workers=3).worker_count() == 3
    monkeypatch.setenv(harness.WORKERS_ENV, "2")
    assert ExperimentConfig(workers=3).worker_count() == 2


def test_parallel_sweep_matches_serial(tmp_path):
    base = dict(presets=["walk", "high_knee"], sigmas=[0.1], seeds=[0], duration=2.0)
    run_sweep(ExperimentConfig(**base, workers=1, out_dir=str(tmp_path / "a")))
    run_sweep(ExperimentConfig(**base, workers=2, out_dir=str(tmp_path / "b")))
    for name in ("trials.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rows_sorted():
    rows = [ResultRow("walk", "F", "distance", 0.1, 1), ResultRow("walk", "F", "baseline", None, 2),
            ResultRow("jog", "D", "distance", 0.0, 0), ResultRow("walk", "F", "distance", 0.05, 0)]
    rows.sort(key=ResultRow.key)
    assert [(r.preset, r.mode, r.sigma_dist) for r in rows] == [
        ("jog", "distance", 0.0), ("walk", "baseline", None), ("walk", "distance", 0.05),
        ("walk", "distance", 0.1)]


def test_golden_result_table(tmp_path):
    run_sweep(ExperimentConfig(**GOLDEN_CONFIG, out_dir=str(tmp_path)))
    got, ref = _read(tmp_path / "trials.csv"), _read(GOLDEN)
    assert list(got[0].keys()) == list(TRIAL_COLUMNS) == list(ref[0].keys())
    assert len(got) == len(ref)
    for g, r in zip(got, ref):
        for col in TRIAL_COLUMNS:
            if col in harness.METRIC_COLUMNS:
                assert float(g[col]) == pytest.approx(float(r[col]), rel=1e-6, abs=1e-9), col
            else:
                assert g[col] == r[col], col


# --------------------------------------------------------------------------- CLI

def test_cli_pipeline(tmp_path, capsys):
    trial, truth = tmp_path / "trial.txt", tmp_path / "truth.csv"
    assert main(["simulate", "--preset", "walk", "--sigma", "0.05", "--duration", "3",
                 "-o", str(trial), "--truth-trajectory", str(truth)]) == 0
    res, est = tmp_path / "row.csv", tmp_path / "est.csv"
    assert main(["run", str(trial), "--mode", "distance", "--noise", "zupt_var=1e-4",
                 "--results", str(res), "--trajectory", str(est)]) == 0
    row = _read(res)[0]
    assert row["mode"] == "distance" and row["sigma_dist"] == "0.05"
    capsys.readouterr()
    assert main(["metrics", str(est), str(truth), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rmse_knee_left_y"] == pytest.approx(float(row["rmse_knee_left_y"]), rel=1e-9)


def test_cli_sweep_config_and_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"presets": ["walk"], "sigmas": [0.2], "seeds": [0, 1], "duration": 2.0,
                               "out_dir": str(tmp_path / "ignored")}))
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--seeds", "4", "--out-dir", str(out)]) == 0
    rows = _read(out / "trials.csv")
    assert {r["seed"] for r in rows} == {"4"}
    assert not (tmp_path / "ignored").exists()


def test_cli_exit_code_on_failure(tmp_path):
    args = ["sweep", "--presets", "walk", "--seeds", "0", "--sigmas", "0.1", "--duration", "1",
            "--out-dir", str(tmp_path), "--init-pos-var", "0", "--init-vel-var", "0"]
    for kv in ("zupt_var=0", "floor_var=0", "accel_var=0"):
        args += ["--noise", kv]
    assert main(args) != 0
    rows = _read(tmp_path / "trials.csv")
    assert all(r["status"] == "failed" and "frame 1" in r["error"] for r in rows)


def test_cli_bad_config(capsys):
    assert main(["sweep", "--presets", "moonwalk"]) != 0
    assert "moonwalk" in capsys.readouterr().err
