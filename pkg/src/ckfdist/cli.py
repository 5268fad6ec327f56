"""Command line entry point: ``ckfdist {simulate,run,sweep,metrics}``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import CKFDistError
from .harness import (METRIC_COLUMNS, TRIAL_COLUMNS, ExperimentConfig, run_sweep, run_trial,
                      write_rows)
from .metrics import ANGLE_NAMES, angle_metrics, ttd_deviation
from .trialio import load_trajectory, load_trial, save_trajectory, save_trial


def _key_value(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}") from None


def _config_flags(p: argparse.ArgumentParser, sweep: bool) -> None:
    """Flags mirroring :class:`ExperimentConfig`; None means 'not given'."""
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    if sweep:
        p.add_argument("--presets", nargs="+")
        p.add_argument("--modes", nargs="+", choices=["baseline", "distance"])
        p.add_argument("--sigmas", nargs="+", type=float, help="sigma_dist values in m")
        p.add_argument("--seeds", nargs="+", type=int)
        p.add_argument("--duration", type=float, help="override the preset duration in s")
        p.add_argument("--sample-rate", type=float)
        p.add_argument("--accel-noise", type=float)
        p.add_argument("--ori-noise", type=float)
        p.add_argument("--height", type=float)
        p.add_argument("--out-dir")
        p.add_argument("--workers", type=int)
    else:
        p.add_argument("--mode", dest="modes", type=lambda m: [m], metavar="{baseline,distance}")
    p.add_argument("--noise", action="append", type=_key_value, metavar="KEY=VALUE",
                   help="NoiseModel override, repeatable (e.g. zupt_var=1e-6)")
    p.add_argument("--dim", action="append", type=_key_value, metavar="KEY=VALUE",
                   help="BodyDimensions field, repeatable; all five are needed")
    p.add_argument("--rom", nargs=2, type=float, metavar=("MIN", "MAX"), help="knee range in deg")
    p.add_argument("--policy", choices=["clamp", "reject"])
    p.add_argument("--init-pos-var", type=float)
    p.add_argument("--init-vel-var", type=float)


def _build_config(args) -> ExperimentConfig:
    data = json.loads(args.config.read_text()) if args.config else {}
    for name in ("presets", "modes", "sigmas", "seeds", "duration", "sample_rate", "accel_noise",
                 "ori_noise", "height", "out_dir", "workers", "rom", "policy", "init_pos_var",
                 "init_vel_var"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if args.noise:
        data["noise"] = {**data.get("noise", {}), **dict(args.noise)}
    if args.dim:
        data["dims"] = {**(data.get("dims") or {}), **dict(args.dim)}
    return ExperimentConfig.from_dict(data)


def cmd_simulate(args) -> int:
    config = ExperimentConfig(presets=[args.preset], sigmas=[args.sigma], seeds=[args.seed],
                              height=args.height, sample_rate=args.sample_rate,
                              accel_noise=args.accel_noise, ori_noise=args.ori_noise,
                              duration=args.duration)
    trial = config.simulate(args.preset, args.sigma, args.seed)
    save_trial(trial, args.output)
    if args.truth_trajectory:
        save_trajectory(args.truth_trajectory, trial.time, trial.truth_pos, trial.truth_angles)
    print(f"wrote {len(trial)} frames to {args.output}")
    return 0


def cmd_run(args) -> int:
    config = _build_config(args)
    trial = load_trial(args.trial)
    res = run_trial(config, trial)
    write_rows(args.results, TRIAL_COLUMNS, [res.row.csv_record()])
    save_trajectory(args.trajectory, trial.time, res.states[:, :9], res.angles)
    m = res.row.metrics
    print(f"{res.row.mode}: knee RMSE {m['rmse_knee_left_y']:.3f}/{m['rmse_knee_right_y']:.3f} deg, "
          f"TTD {m['ttd_left']:.2f}/{m['ttd_right']:.2f} %, {res.row.runtime:.2f} s")
    return 0


def cmd_sweep(args) -> int:
    config = _build_config(args)
    result = run_sweep(config)
    print(f"{len(result.rows)} trials, {result.n_failed} failed; tables in {config.out_dir}")
    for r in result.rows:
        if r.status != "ok":
            print(f"  failed {r.preset} {r.mode} sigma={r.sigma_dist} seed={r.seed}: {r.error}",
                  file=sys.stderr)
    return 1 if result.n_failed else 0


def cmd_metrics(args) -> int:
    _, est_pos, est_ang = load_trajectory(args.estimate)
    _, ref_pos, ref_ang = load_trajectory(args.reference)
    m = angle_metrics(est_ang, ref_ang)
    report = {k: (float(np.rad2deg(v)) if k.startswith("rmse_") else v) for k, v in m.items()}
    report["ttd_left"] = ttd_deviation(est_pos[:, 3:6], ref_pos[:, 3:6])
    report["ttd_right"] = ttd_deviation(est_pos[:, 6:9], ref_pos[:, 6:9])
    if args.json:
        print(json.dumps({k: report[k] for k in METRIC_COLUMNS}, indent=2))
        return 0
    print(f"{'angle':<14}{'RMSE (deg)':>12}{'CC':>10}")
    for n in ANGLE_NAMES:
        print(f"{n:<14}{report['rmse_' + n]:>12.4f}{report['cc_' + n]:>10.5f}")
    print(f"TTD deviation left {report['ttd_left']:.3f} %, right {report['ttd_right']:.3f} %")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ckfdist", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a trial file from a motion preset")
    p.add_argument("--preset", default="walk")
    p.add_argument("--sigma", type=float, default=0.0, help="distance noise std in m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float)
    p.add_argument("--sample-rate", type=float, default=100.0)
    p.add_argument("--accel-noise", type=float, default=0.02)
    p.add_argument("--ori-noise", type=float, default=0.0)
    p.add_argument("--height", type=float, default=1.70)
    p.add_argument("--truth-trajectory", type=Path, help="also write the truth as a trajectory CSV")
    p.add_argument("-o", "--output", type=Path, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="filter one trial file")
    p.add_argument("trial", type=Path)
    _config_flags(p, sweep=False)
    p.add_argument("--results", type=Path, required=True, help="one-row result CSV")
    p.add_argument("--trajectory", type=Path, required=True, help="estimated trajectory CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a preset x sigma x seed x mode grid")
    _config_flags(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="compare an estimated trajectory with a reference")
    p.add_argument("estimate", type=Path)
    p.add_argument("reference", type=Path)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CKFDistError, ValueError, OSError) as exc:
        print(f"ckfdist {args.command}: {exc}", file=sys.stderr)
        return 1
