"""
Filter one simulated walk in both modes and compare against the truth.

    python demos/01_single_trial.py [--preset walk] [--sigma 0.1] [--seed 0]
"""
import argparse

import numpy as np

from ckfdist.harness import ExperimentConfig, run_trial
from ckfdist.metrics import ANGLE_NAMES

parser = argparse.ArgumentParser()
parser.add_argument("--preset", default="walk")
parser.add_argument("--sigma", type=float, default=0.1, help="distance noise std (m)")
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

config = ExperimentConfig(presets=[args.preset], sigmas=[args.sigma], seeds=[args.seed])
trial = config.simulate(args.preset, args.sigma, args.seed)
print(f"{args.preset}: {len(trial)} frames at {trial.sample_rate:g} Hz, "
      f"{trial.contacts.all(axis=1).mean():.0%} double support, "
      f"{(~trial.contacts.any(axis=1)).mean():.0%} flight")

# The baseline pins the pelvis above the ankles; distance mode replaces that
# assumption with the pelvis-to-ankle vectors solved from the distances.
results = {mode: run_trial(config, trial, mode) for mode in ("baseline", "distance")}

print(f"\n{'angle':<14}{'baseline RMSE':>15}{'distance RMSE':>15}{'baseline CC':>13}{'distance CC':>13}")
for name in ANGLE_NAMES:
    b, d = results["baseline"].row.metrics, results["distance"].row.metrics
    print(f"{name:<14}{b['rmse_' + name]:>15.3f}{d['rmse_' + name]:>15.3f}"
          f"{b['cc_' + name]:>13.5f}{d['cc_' + name]:>13.5f}")

for mode, res in results.items():
    m = res.row.metrics
    print(f"\n{mode}: TTD deviation left {m['ttd_left']:.2f} %, right {m['ttd_right']:.2f} %, "
          f"filtered in {res.row.runtime:.2f} s")

# Pelvis drift: the baseline's height assumption is off whenever the knees
# bend, the distance mode tracks the pelvis height through the gait.
for mode, res in results.items():
    dz = res.states[:, 2] - trial.truth_pos[:, 2]
    print(f"{mode}: pelvis height error mean {1e3 * dz.mean():+.1f} mm, std {1e3 * dz.std():.1f} mm")
