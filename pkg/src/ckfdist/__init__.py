"""Constrained Kalman filtering of lower-body kinematics from three IMUs and pelvis-ankle distances."""
from .body import BodyDimensions, PoseSnapshot
from .ckf import CKFConfig, ContactFlags, FrameInput, Mode, NoiseModel, iter_filter, run_filter, step
from .distance import DistanceMeasurement, InfeasiblePolicy, solve_knee_angle
from .harness import ExperimentConfig, ResultRow, run_sweep, run_trial
from .simulate import PRESETS, TrialData, simulate_trial
from .state import FilterState
from .trialio import load_trial, save_trial

__version__ = "0.1.0"

__all__ = [
    "BodyDimensions", "CKFConfig", "ContactFlags", "DistanceMeasurement", "ExperimentConfig",
    "FilterState", "FrameInput", "InfeasiblePolicy", "Mode", "NoiseModel", "PRESETS", "PoseSnapshot",
    "ResultRow", "TrialData", "iter_filter", "load_trial", "run_filter", "run_sweep", "run_trial",
    "save_trial", "simulate_trial", "solve_knee_angle", "step",
]
