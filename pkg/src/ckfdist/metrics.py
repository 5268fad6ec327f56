"""
Evaluation metrics: bias-removed RMSE, Pearson correlation and
total-travelled-distance deviation, plus joint angle extraction.

Hip angles are the intrinsic Y-X-Z decomposition of the pelvis-to-thigh
rotation, i.e. ``R_pelvis^T R_thigh = Ry(sagittal) Rx(frontal) Rz(transverse)``.
With r_y pointing left, a positive sagittal hip angle is extension. The knee
sagittal angle is the hinge flexion angle (positive = flexion).
"""
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

from .body import BodyDimensions, hip_position, knee_angle_from_positions, knee_position, thigh_orientation
from .errors import DegenerateSeries, LengthMismatch, ZeroTruthPath

ANGLE_NAMES = ("hip_left_y", "hip_left_x", "hip_left_z", "hip_right_y", "hip_right_x",
               "hip_right_z", "knee_left_y", "knee_right_y")


def _pair(est: ArrayLike, truth: ArrayLike) -> tuple[NDArray, NDArray]:
    est = np.asarray(est, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise LengthMismatch(f"series shapes differ: {est.shape} vs {truth.shape}")
    if len(est) < 2:
        raise LengthMismatch("at least two samples are required")
    return est, truth


def rmse_bias_removed(est: ArrayLike, truth: ArrayLike) -> float:
    """Root mean square of the error after subtracting its mean."""
    est, truth = _pair(est, truth)
    e = est - truth
    return float(np.sqrt(np.mean((e - e.mean()) ** 2)))


def pearson_cc(est: ArrayLike, truth: ArrayLike) -> float:
    """
    Pearson correlation coefficient.

    Raises
    ------
    DegenerateSeries
        If either series is constant.
    """
    est, truth = _pair(est, truth)
    a = est - est.mean()
    b = truth - truth.mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    scale_a = max(np.abs(est).max(), 1.0)
    scale_b = max(np.abs(truth).max(), 1.0)
    if na <= 1e-12 * scale_a * np.sqrt(len(a)) or nb <= 1e-12 * scale_b * np.sqrt(len(b)):
        raise DegenerateSeries("correlation undefined for a constant series")
    return float(np.clip((a @ b) / (na * nb), -1.0, 1.0))


def path_length(xyz: ArrayLike) -> float:
    """Total travelled distance of a sampled 3D path."""
    xyz = np.asarray(xyz, dtype=float)
    return float(np.sum(np.linalg.norm(np.diff(xyz, axis=0), axis=1)))


def ttd_deviation(est_xyz: ArrayLike, truth_xyz: ArrayLike) -> float:
    """
    Total travelled distance error in percent of the true distance.

    Raises
    ------
    ZeroTruthPath
        If the true path has zero length.
    """
    est, truth = _pair(est_xyz, truth_xyz)
    ref = path_length(truth)
    if ref <= 0:
        raise ZeroTruthPath("reference path does not move")
    return abs(path_length(est) - ref) / ref * 100.0


def hip_angles(pelvis_R: ArrayLike, thigh_R: ArrayLike) -> NDArray:
    """Sagittal, frontal and transverse hip angles (N, 3) in radians."""
    rel = np.swapaxes(np.asarray(pelvis_R), -1, -2) @ np.asarray(thigh_R)
    return Rotation.from_matrix(rel.reshape(-1, 3, 3)).as_euler("YXZ").reshape(rel.shape[:-2] + (3,))


def joint_angles(mid_pelvis: ArrayLike, left_ankle: ArrayLike, right_ankle: ArrayLike,
                 pelvis_R: ArrayLike, lshank_R: ArrayLike, rshank_R: ArrayLike,
                 dims: BodyDimensions) -> NDArray:
    """
    Hip (3 planes) and knee (sagittal) angles from positions and orientations.

    Thighs are reconstructed from the hip and knee positions with the shank
    hinge axis. Inputs are stacks over frames; the output has shape (N, 8)
    with columns ordered as :data:`ANGLE_NAMES`.

    Raises
    ------
    DegenerateSegment
        If a hip and knee coincide in any frame.
    """
    out = []
    knees = []
    for side, ankle, shank_R in (("left", left_ankle, lshank_R), ("right", right_ankle, rshank_R)):
        hip = hip_position(mid_pelvis, pelvis_R, dims, side)
        knee = knee_position(ankle, shank_R, dims.shank(side))
        out.append(hip_angles(pelvis_R, thigh_orientation(hip, knee, shank_R)))
        knees.append(np.atleast_1d(knee_angle_from_positions(hip, knee, shank_R)))
    return np.column_stack([out[0], out[1], knees[0], knees[1]])


def angle_metrics(est_angles: ArrayLike, truth_angles: ArrayLike) -> dict[str, float]:
    """RMSE and CC per angle column; NaN CC where the truth is constant."""
    est_angles = np.asarray(est_angles)
    truth_angles = np.asarray(truth_angles)
    res = {}
    for k, name in enumerate(ANGLE_NAMES):
        res[f"rmse_{name}"] = rmse_bias_removed(est_angles[:, k], truth_angles[:, k])
        try:
            res[f"cc_{name}"] = pearson_cc(est_angles[:, k], truth_angles[:, k])
        except DegenerateSeries:
            res[f"cc_{name}"] = float("nan")
    return res
