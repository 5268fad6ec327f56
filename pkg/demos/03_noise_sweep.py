"""
Joint angle error against distance noise, the plot-ready way.

Runs the full sigma_dist grid for a walk and a dynamic preset and writes the
per-trial table, the per-cell summary and timings to ``--out-dir``. The
printed table is the knee column of the summary. Set CKFDIST_WORKERS to use
more processes.

    python demos/03_noise_sweep.py [--seeds 5] [--out-dir results/noise_sweep]
"""
import argparse
import csv
from pathlib import Path

from ckfdist.harness import ExperimentConfig, run_sweep
from ckfdist.simulate import SIGMA_DIST_SWEEP

parser = argparse.ArgumentParser()
parser.add_argument("--seeds", type=int, default=5)
parser.add_argument("--presets", nargs="+", default=["walk", "high_knee"])
parser.add_argument("--duration", type=float, default=None)
parser.add_argument("--out-dir", default="results/noise_sweep")
args = parser.parse_args()

config = ExperimentConfig(presets=args.presets, sigmas=list(SIGMA_DIST_SWEEP), seeds=list(range(args.seeds)),
                          duration=args.duration, out_dir=args.out_dir)
result = run_sweep(config)
print(f"{len(result.rows)} trials, {result.n_failed} failed -> {Path(args.out_dir).resolve()}")

with open(Path(args.out_dir) / "summary.csv", newline="") as fh:
    summary = list(csv.DictReader(fh))

print(f"\n{'preset':<12}{'mode':<10}{'sigma':>7}{'knee RMSE (deg)':>18}{'knee CC':>10}{'TTD (%)':>9}")
for s in summary:
    rmse = 0.5 * (float(s["rmse_knee_left_y_mean"]) + float(s["rmse_knee_right_y_mean"]))
    cc = 0.5 * (float(s["cc_knee_left_y_mean"]) + float(s["cc_knee_right_y_mean"]))
    ttd = 0.5 * (float(s["ttd_left_mean"]) + float(s["ttd_right_mean"]))
    print(f"{s['preset']:<12}{s['mode']:<10}{s['sigma_dist'] or '-':>7}{rmse:>18.3f}{cc:>10.5f}{ttd:>9.2f}")
