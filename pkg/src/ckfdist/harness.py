"""
Experiment orchestration: single filter runs and noise sweeps.

A sweep runs every (preset, seed) pair once in baseline mode, since that
mode never reads the distances, and once per sigma_dist in distance mode.
Rows are sorted before writing, so the result tables do not depend on the
worker count or completion order. Wall-clock runtimes go to a separate
timing table to keep the result tables reproducible byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .body import BodyDimensions
from .ckf import CKFConfig, Mode, NoiseModel, run_filter
from .distance import InfeasiblePolicy
from .metrics import ANGLE_NAMES, angle_metrics, joint_angles, ttd_deviation
from .simulate import PRESETS, TrialData, get_preset, simulate_trial
from .state import FilterState

WORKERS_ENV = "CKFDIST_WORKERS"

METRIC_COLUMNS = (*(f"rmse_{n}" for n in ANGLE_NAMES), *(f"cc_{n}" for n in ANGLE_NAMES),
                  "ttd_left", "ttd_right")
KEY_COLUMNS = ("preset", "group", "mode", "sigma_dist", "seed")
TRIAL_COLUMNS = (*KEY_COLUMNS, "status", *METRIC_COLUMNS, "error")
SUMMARY_COLUMNS = ("preset", "group", "mode", "sigma_dist", "n_ok", "n_failed",
                   *(f"{m}_{s}" for m in METRIC_COLUMNS for s in ("mean", "std")))


@dataclass
class ExperimentConfig:
    """
    Everything that defines a run or a sweep.

    `noise` holds :class:`NoiseModel` field overrides and `dims`
    :class:`BodyDimensions` fields (when omitted, dimensions follow from
    `height`). `rom` is in degrees. `duration` overrides the preset length.
    """

    presets: list[str] = field(default_factory=lambda: ["walk"])
    modes: list[str] = field(default_factory=lambda: ["baseline", "distance"])
    sigmas: list[float] = field(default_factory=lambda: [0.1])
    seeds: list[int] = field(default_factory=lambda: [0])
    noise: dict = field(default_factory=dict)
    dims: dict | None = None
    height: float = 1.70
    rom: tuple[float, float] = (0.0, 140.0)
    policy: str = "clamp"
    sample_rate: float = 100.0
    accel_noise: float = 0.02
    ori_noise: float = 0.0
    duration: float | None = None
    init_pos_var: float = 1e-6
    init_vel_var: float = 1e-6
    out_dir: str = "results"
    workers: int | None = None

    def __post_init__(self):
        self.presets = list(self.presets)
        self.modes = [Mode(m).value for m in self.modes]
        self.sigmas = [float(s) for s in self.sigmas]
        self.seeds = [int(s) for s in self.seeds]
        self.rom = tuple(float(v) for v in self.rom)
        self.policy = InfeasiblePolicy(self.policy).value
        if not self.presets or not self.seeds or not self.modes:
            raise ValueError("at least one preset, one seed and one mode are required")
        if "distance" in self.modes and not self.sigmas:
            raise ValueError("distance mode needs at least one sigma_dist value")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigma_dist values must be non-negative")
        unknown = [p for p in self.presets if p not in PRESETS and p != "standing"]
        if unknown:
            raise ValueError(f"unknown presets {unknown}; choose from {sorted(PRESETS)}")
        bad = set(self.noise) - {f.name for f in fields(NoiseModel)}
        if bad:
            raise ValueError(f"unknown noise settings {sorted(bad)}")
        self.noise_model()
        self.body_dims()

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ValueError(f"unknown configuration keys {sorted(bad)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> ExperimentConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rom"] = list(self.rom)
        return d

    def noise_model(self) -> NoiseModel:
        return NoiseModel(**self.noise)

    def body_dims(self) -> BodyDimensions:
        return BodyDimensions(**self.dims) if self.dims else BodyDimensions.from_height(self.height)

    def ckf_config(self, mode: str, dims: BodyDimensions) -> CKFConfig:
        return CKFConfig(dims=dims, noise=self.noise_model(), rom=tuple(np.deg2rad(self.rom)),
                         policy=self.policy, mode=mode)

    def simulate(self, preset: str, sigma: float, seed: int) -> TrialData:
        overrides = {} if self.duration is None else {"duration": self.duration}
        return simulate_trial(preset, sigma_dist=sigma, seed=seed, dims=self.body_dims(),
                              sample_rate=self.sample_rate, accel_noise=self.accel_noise,
                              ori_noise=self.ori_noise, **overrides)

    def worker_count(self) -> int:
        """Worker processes; the environment variable wins over `workers`."""
        env = os.environ.get(WORKERS_ENV)
        if env:
            return max(1, int(env))
        return max(1, int(self.workers or 1))


@dataclass
class ResultRow:
    """
    Metrics of one filter run. Angles are in degrees, TTD deviations in
    percent. `sigma_dist` is None for baseline rows.
    """

    preset: str
    group: str
    mode: str
    sigma_dist: float | None
    seed: int
    status: str = "ok"
    metrics: dict = field(default_factory=dict)
    error: str = ""
    runtime: float = float("nan")

    def key(self) -> tuple:
        return (self.preset, self.mode, -1.0 if self.sigma_dist is None else self.sigma_dist, self.seed)

    def csv_record(self) -> dict:
        rec = {"preset": self.preset, "group": self.group, "mode": self.mode,
               "sigma_dist": "" if self.sigma_dist is None else _num(self.sigma_dist),
               "seed": str(self.seed), "status": self.status, "error": self.error}
        for c in METRIC_COLUMNS:
            rec[c] = _num(self.metrics.get(c, float("nan")))
        return rec


@dataclass
class TrialResult:
    row: ResultRow
    states: NDArray
    angles: NDArray


def _num(v: float) -> str:
    return "nan" if v is None or math.isnan(v) else "%.10g" % v


def initial_state(trial: TrialData, pos_var: float = 1e-6, vel_var: float = 1e-6) -> FilterState:
    """Exact first-frame positions, zero velocities, diagonal covariance."""
    p = trial.truth_pos[0]
    return FilterState.from_positions(p[0:3], p[3:6], p[6:9], pos_var=pos_var, vel_var=vel_var)


def run_trial(config: ExperimentConfig, trial: TrialData, mode: str | None = None) -> TrialResult:
    """
    Filter one trial and score it against its ground truth.

    Raises
    ------
    FilterStepError
        When a filter step fails; carries the frame index.
    """
    mode = Mode(mode or config.modes[0]).value
    cfg = config.ckf_config(mode, trial.dims)
    t0 = time.perf_counter()
    X = run_filter(trial.frames(), initial_state(trial, config.init_pos_var, config.init_vel_var), cfg)
    runtime = time.perf_counter() - t0

    R = trial.sensor_rotations()
    angles = joint_angles(X[:, 0:3], X[:, 3:6], X[:, 6:9], R[:, 0], R[:, 1], R[:, 2], trial.dims)
    m = angle_metrics(angles, trial.truth_angles)
    metrics = {k: (np.rad2deg(v) if k.startswith("rmse_") else v) for k, v in m.items()}
    metrics["ttd_left"] = ttd_deviation(X[:, 3:6], trial.truth_pos[:, 3:6])
    metrics["ttd_right"] = ttd_deviation(X[:, 6:9], trial.truth_pos[:, 6:9])
    sigma = None if mode == Mode.BASELINE.value else float(trial.meta.get("sigma_dist", 0.0))
    row = ResultRow(preset=trial.meta.get("preset", ""), group=trial.meta.get("group", ""), mode=mode,
                    sigma_dist=sigma, seed=int(trial.meta.get("seed", 0)), metrics=metrics,
                    runtime=runtime)
    return TrialResult(row, X, angles)


def sweep_cells(config: ExperimentConfig) -> list[tuple[str, str, float | None, int]]:
    """(preset, mode, sigma_dist, seed) for every run of a sweep."""
    cells = []
    for preset in config.presets:
        for seed in config.seeds:
            if "baseline" in config.modes:
                cells.append((preset, "baseline", None, seed))
            if "distance" in config.modes:
                cells.extend((preset, "distance", s, seed) for s in config.sigmas)
    return cells


def _run_cell(config_dict: dict, cell: tuple) -> ResultRow:
    preset, mode, sigma, seed = cell
    config = ExperimentConfig.from_dict(config_dict)
    try:
        trial = config.simulate(preset, 0.0 if sigma is None else sigma, seed)
        return run_trial(config, trial, mode).row
    except Exception as exc:  # a failed cell is recorded, the sweep goes on
        return ResultRow(preset=preset, group=get_preset(preset).group, mode=mode, sigma_dist=sigma,
                         seed=seed, status="failed", error=f"{type(exc).__name__}: {exc}")


@dataclass
class SweepResult:
    rows: list[ResultRow]
    summary: list[dict]

    @property
    def n_failed(self) -> int:
        return sum(r.status != "ok" for r in self.rows)


def run_sweep(config: ExperimentConfig, write: bool = True) -> SweepResult:
    """
    Run all cells of `config` and aggregate them per (preset, mode, sigma).

    With `write`, the per-trial table, the summary and the timing table are
    written to ``trials.csv``, ``summary.csv`` and ``timing.csv`` in
    ``config.out_dir``.
    """
    cells = sweep_cells(config)
    cfg = config.to_dict()
    workers = config.worker_count()
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, [cfg] * len(cells), cells))
    else:
        rows = [_run_cell(cfg, c) for c in cells]
    rows.sort(key=ResultRow.key)
    result = SweepResult(rows, summarize(rows))
    if write:
        write_sweep(result, config.out_dir)
    return result


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean and population standard deviation of every metric per cell."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in sorted(rows, key=ResultRow.key):
        groups.setdefault((r.preset, r.mode, r.sigma_dist), []).append(r)
    out = []
    for (preset, mode, sigma), members in groups.items():
        ok = [r for r in members if r.status == "ok"]
        rec = {"preset": preset, "group": members[0].group, "mode": mode,
               "sigma_dist": "" if sigma is None else _num(sigma),
               "n_ok": str(len(ok)), "n_failed": str(len(members) - len(ok))}
        for c in METRIC_COLUMNS:
            vals = np.array([r.metrics[c] for r in ok], dtype=float)
            vals = vals[~np.isnan(vals)]
            rec[f"{c}_mean"] = _num(vals.mean()) if len(vals) else "nan"
            rec[f"{c}_std"] = _num(vals.std()) if len(vals) else "nan"
        out.append(rec)
    return out


def write_sweep(result: SweepResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("trials", "summary", "timing")}
    write_rows(paths["trials"], TRIAL_COLUMNS, [r.csv_record() for r in result.rows])
    write_rows(paths["summary"], SUMMARY_COLUMNS, result.summary)
    timing = [{"preset": r.preset, "mode": r.mode,
               "sigma_dist": "" if r.sigma_dist is None else _num(r.sigma_dist),
               "seed": str(r.seed), "runtime_s": _num(r.runtime)} for r in result.rows]
    write_rows(paths["timing"], ("preset", "mode", "sigma_dist", "seed", "runtime_s"), timing)
    return paths


def write_rows(path: str | Path, columns, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(records)
