"""
Lower-body geometry: segment lengths and the rigid-body relations between
mid-pelvis, hips, knees and ankles.

Segment frames follow one convention throughout the package: r_x points
anterior, r_y points to the subject's left (the knee hinge axis for the
shank), r_z points proximally along the segment. A rotation matrix holds
these basis vectors as its columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateSegment

Side = Literal["left", "right"]

EPS_LEN = 1e-6

# segment length as a fraction of standing height
THIGH_RATIO = 0.245
SHANK_RATIO = 0.246
PELVIS_RATIO = 0.135


@dataclass(frozen=True)
class BodyDimensions:
    """
    Constant segment lengths in meters.

    Parameters
    ----------
    pelvis_width : float
        Hip joint to hip joint distance.
    thigh_left, thigh_right : float
        Hip to knee distance.
    shank_left, shank_right : float
        Knee to ankle distance.
    """

    pelvis_width: float
    thigh_left: float
    thigh_right: float
    shank_left: float
    shank_right: float

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive length, got {value!r}")

    @classmethod
    def from_height(cls, height: float = 1.70) -> BodyDimensions:
        """Symmetric dimensions from standing height using fixed ratios."""
        return cls(
            pelvis_width=PELVIS_RATIO * height,
            thigh_left=THIGH_RATIO * height,
            thigh_right=THIGH_RATIO * height,
            shank_left=SHANK_RATIO * height,
            shank_right=SHANK_RATIO * height,
        )

    def thigh(self, side: Side) -> float:
        return self.thigh_left if side == "left" else self.thigh_right

    def shank(self, side: Side) -> float:
        return self.shank_left if side == "left" else self.shank_right

    def leg_length(self, side: Side | None = None) -> float:
        """Straight-leg hip to ankle length; mean of both legs if no side given."""
        if side is None:
            return 0.5 * (self.leg_length("left") + self.leg_length("right"))
        return self.thigh(side) + self.shank(side)

    def as_dict(self) -> dict[str, float]:
        return {
            "pelvis_width": self.pelvis_width,
            "thigh_left": self.thigh_left,
            "thigh_right": self.thigh_right,
            "shank_left": self.shank_left,
            "shank_right": self.shank_right,
        }


@dataclass
class PoseSnapshot:
    """World positions of mid-pelvis and ankles with the instrumented segment orientations."""

    mid_pelvis_pos: NDArray
    left_ankle_pos: NDArray
    right_ankle_pos: NDArray
    pelvis_ori: NDArray
    left_shank_ori: NDArray
    right_shank_ori: NDArray

    def ankle(self, side: Side) -> NDArray:
        return self.left_ankle_pos if side == "left" else self.right_ankle_pos

    def shank_ori(self, side: Side) -> NDArray:
        return self.left_shank_ori if side == "left" else self.right_shank_ori


def _side_sign(side: Side) -> float:
    if side == "left":
        return 1.0
    if side == "right":
        return -1.0
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def hip_offset(pelvis_ori: ArrayLike, pelvis_width: float, side: Side) -> NDArray:
    """Vector from mid-pelvis to the hip joint of `side`."""
    return _side_sign(side) * 0.5 * pelvis_width * np.asarray(pelvis_ori)[..., :, 1]


def hip_position(mid_pelvis: ArrayLike, pelvis_ori: ArrayLike, dims: BodyDimensions,
                 side: Side) -> NDArray:
    """
    Hip joint position: mid-pelvis shifted half a pelvis width along the
    pelvis r_y axis (towards +r_y for the left hip, -r_y for the right).
    """
    return np.asarray(mid_pelvis, dtype=float) + hip_offset(pelvis_ori, dims.pelvis_width, side)


def knee_position(ankle_pos: ArrayLike, shank_ori: ArrayLike, shank_len: float) -> NDArray:
    """Knee joint position, one shank length up the shank r_z axis from the ankle."""
    return np.asarray(ankle_pos, dtype=float) + shank_len * np.asarray(shank_ori)[..., :, 2]


def knee_angle_from_positions(hip: ArrayLike, knee: ArrayLike, shank_ori: ArrayLike,
                              eps: float = EPS_LEN) -> float | NDArray:
    """
    Knee flexion angle of the hinge joint.

    With u = hip - knee expressed in the shank frame, the thigh satisfies
    u = |u| (r_z cos(theta) - r_x sin(theta)), hence
    theta = atan2(-u . r_x, u . r_z). Zero is a straight leg and positive
    angles move the ankle posteriorly (flexion).

    Parameters
    ----------
    hip, knee : array_like, shape (..., 3)
    shank_ori : array_like, shape (..., 3, 3)
    eps : float
        Minimum accepted thigh vector length.

    Returns
    -------
    theta : float or ndarray
        Angle in (-pi, pi].

    Raises
    ------
    DegenerateSegment
        If |hip - knee| <= eps.
    """
    u = np.asarray(hip, dtype=float) - np.asarray(knee, dtype=float)
    if np.any(np.linalg.norm(u, axis=-1) <= eps):
        raise DegenerateSegment("hip and knee coincide; knee angle undefined")
    R = np.asarray(shank_ori, dtype=float)
    ux = np.einsum("...i,...i->...", u, R[..., :, 0])
    uz = np.einsum("...i,...i->...", u, R[..., :, 2])
    theta = np.arctan2(-ux, uz)
    return float(theta) if np.ndim(theta) == 0 else theta


def thigh_orientation(hip: ArrayLike, knee: ArrayLike, shank_ori: ArrayLike,
                      eps: float = EPS_LEN) -> NDArray:
    """
    Thigh frame reconstructed from joint positions.

    r_z points from knee to hip, r_y is the shank hinge axis (made exactly
    orthogonal to r_z) and r_x = r_y x r_z. Works on stacks of frames.

    Raises
    ------
    DegenerateSegment
        If |hip - knee| <= eps.
    """
    u = np.asarray(hip, dtype=float) - np.asarray(knee, dtype=float)
    n = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(n <= eps):
        raise DegenerateSegment("hip and knee coincide; thigh orientation undefined")
    R = np.asarray(shank_ori, dtype=float)
    rz = u / n
    ry = R[..., :, 1] - np.sum(R[..., :, 1] * rz, axis=-1, keepdims=True) * rz
    ny = np.linalg.norm(ry, axis=-1, keepdims=True)
    # thigh along the hinge axis: fall back on the shank r_x to fix the frame
    bad = ny[..., 0] < 1e-9
    if np.any(bad):
        alt = np.cross(rz, R[..., :, 0])
        ry = np.where(bad[..., None], alt, ry)
        ny = np.linalg.norm(ry, axis=-1, keepdims=True)
    ry = ry / ny
    rx = np.cross(ry, rz)
    return np.stack([rx, ry, rz], axis=-1)
