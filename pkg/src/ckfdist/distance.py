"""
Pelvis-to-ankle distance as a vector pseudo-measurement.

A scalar distance between the mid-pelvis and an ankle is turned into a full
3D pelvis-to-ankle vector. With the pelvis and shank orientations known and
the knee modelled as a hinge with constant segment lengths, the ankle
position relative to the pelvis depends on the knee angle alone:

    tau(theta) = psi + d_thigh * (r_x sin(theta) - r_z cos(theta))

where psi collects the hip offset and the shank vector and r_x, r_z are shank
axes. Squaring gives ``alpha cos(theta) + beta sin(theta) = gamma``, which is
solved for the knee angle; the branch closest to the predicted knee angle is
kept and ``tau`` evaluated there becomes the measurement of
``p_ankle - p_mid_pelvis``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .body import (EPS_LEN, BodyDimensions, Side, hip_offset, hip_position, knee_angle_from_positions,
                   knee_position)
from .errors import DegenerateSegment, IllConditioned, Infeasible
from .state import N_STATE, POS

EPS_COND = 1e-12
ROOT_TOL = 1e-9


class InfeasiblePolicy(str, Enum):
    """What to do with a distance that no knee angle can produce."""

    CLAMP = "clamp"
    REJECT = "reject"


@dataclass(frozen=True)
class DistanceMeasurement:
    """Measured mid-pelvis to ankle distance on one side."""

    side: Side
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if not self.value >= 0 or not self.sigma >= 0:
            raise ValueError("distance and sigma must be non-negative")


@dataclass
class PseudoMeasurement:
    """Rows of a linear measurement ``y = H x + v`` with ``var(v) = variance``."""

    H: NDArray
    y: NDArray
    variance: NDArray

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float).reshape(-1, N_STATE)
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.variance = np.asarray(self.variance, dtype=float).reshape(-1)
        if not (len(self.H) == len(self.y) == len(self.variance)):
            raise ValueError("H, y and variance must have the same number of rows")

    @classmethod
    def empty(cls) -> PseudoMeasurement:
        return cls(np.zeros((0, N_STATE)), np.zeros(0), np.zeros(0))

    def __len__(self) -> int:
        return len(self.y)


def compute_psi(pelvis_ori: ArrayLike, shank_ori: ArrayLike, dims: BodyDimensions,
                side: Side) -> NDArray:
    """Mid-pelvis to hip offset plus the knee to ankle shank vector."""
    return hip_offset(pelvis_ori, dims.pelvis_width, side) - dims.shank(side) * np.asarray(shank_ori)[:, 2]


def pelvis_ankle_vector(psi: ArrayLike, theta: float, thigh_len: float,
                        shank_ori: ArrayLike) -> NDArray:
    """Mid-pelvis to ankle vector for knee angle `theta`."""
    R = np.asarray(shank_ori, dtype=float)
    return np.asarray(psi, dtype=float) + thigh_len * (R[:, 0] * np.sin(theta) - R[:, 2] * np.cos(theta))


def knee_equation_coefficients(d_hat: float, psi: ArrayLike, thigh_len: float,
                               shank_ori: ArrayLike) -> tuple[float, float, float]:
    """Coefficients of ``alpha cos(theta) + beta sin(theta) = gamma``."""
    psi = np.asarray(psi, dtype=float)
    R = np.asarray(shank_ori, dtype=float)
    alpha = -2.0 * thigh_len * float(psi @ R[:, 2])
    beta = 2.0 * thigh_len * float(psi @ R[:, 0])
    gamma = d_hat * d_hat - float(psi @ psi) - thigh_len * thigh_len
    return alpha, beta, gamma


def wrap_angle(a: ArrayLike) -> NDArray:
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def solve_knee_angle(d_hat: float, psi: ArrayLike, thigh_len: float, shank_ori: ArrayLike,
                     theta_ref: float, policy: InfeasiblePolicy | str = InfeasiblePolicy.CLAMP,
                     eps_cond: float = EPS_COND) -> float:
    """
    Knee angle that reproduces a measured pelvis-to-ankle distance.

    Both roots of the quadratic in cos(theta) are taken with either sign of
    the angle. Candidates that do not satisfy the original trigonometric
    equation are discarded, and of the remaining ones the candidate closest
    to `theta_ref` on the circle is returned.

    Parameters
    ----------
    d_hat : float
        Measured distance (m).
    psi : array_like, shape (3,)
        Hip offset plus shank vector, see :func:`compute_psi`.
    thigh_len : float
    shank_ori : array_like, shape (3, 3)
    theta_ref : float
        Predicted knee angle used to pick the branch.
    policy : {'clamp', 'reject'}
        Handling of unreachable distances. ``clamp`` moves gamma onto the
        nearest reachable value, ``reject`` raises :class:`Infeasible`.

    Returns
    -------
    theta : float
        Knee angle in (-pi, pi].

    Raises
    ------
    IllConditioned
        If alpha^2 + beta^2 <= eps_cond.
    Infeasible
        If the distance is unreachable and the policy is ``reject``.
    """
    policy = InfeasiblePolicy(policy)
    alpha, beta, gamma = knee_equation_coefficients(d_hat, psi, thigh_len, shank_ori)
    return _solve_trig(alpha, beta, gamma, theta_ref, policy, eps_cond, d_hat)


def wrap_scalar(a: float) -> float:
    """Scalar version of :func:`wrap_angle`."""
    w = math.fmod(a + math.pi, 2 * math.pi)
    if w < 0:
        w += 2 * math.pi
    w -= math.pi
    return math.pi if w == -math.pi else w


def _solve_trig(alpha: float, beta: float, gamma: float, theta_ref: float,
                policy: InfeasiblePolicy, eps_cond: float, d_hat: float) -> float:
    rho2 = alpha * alpha + beta * beta
    if rho2 <= eps_cond:
        raise IllConditioned(f"alpha^2 + beta^2 = {rho2:.3g} is too small to solve for the knee angle")
    rho = math.sqrt(rho2)
    if abs(gamma) > rho:
        if abs(gamma) - rho > ROOT_TOL * max(1.0, rho) and policy is InfeasiblePolicy.REJECT:
            raise Infeasible(f"distance {d_hat:.6g} m is not reachable (|gamma|={abs(gamma):.6g} > {rho:.6g})")
        gamma = math.copysign(rho, gamma)

    disc = math.sqrt(max(rho2 - gamma * gamma, 0.0))
    tol = ROOT_TOL * max(1.0, rho)
    best, best_dist, fallback, fallback_res = None, math.inf, 0.0, math.inf
    for sgn in (1.0, -1.0):
        # paired roots of the quadratics in cos and sin; arccos alone loses
        # precision near cos = +-1, so the angle is taken with atan2
        c = (alpha * gamma + sgn * beta * disc) / rho2
        s = (beta * gamma - sgn * alpha * disc) / rho2
        for cand in (math.atan2(s, c), math.atan2(-s, c)):
            res = abs(alpha * math.cos(cand) + beta * math.sin(cand) - gamma)
            if res < fallback_res:
                fallback, fallback_res = cand, res
            if res <= tol:
                d = abs(wrap_scalar(cand - theta_ref))
                if d < best_dist:
                    best, best_dist = cand, d
    return wrap_scalar(fallback if best is None else best)


def predicted_knee_angle(x: ArrayLike, pelvis_ori: ArrayLike, shank_ori: ArrayLike,
                         dims: BodyDimensions, side: Side) -> float:
    """Knee angle implied by a state vector; 0 when the thigh is degenerate."""
    x = np.asarray(x)
    hip = hip_position(x[POS["mid_pelvis"]], pelvis_ori, dims, side)
    knee = knee_position(x[POS[side]], shank_ori, dims.shank(side))
    try:
        return knee_angle_from_positions(hip, knee, shank_ori)
    except DegenerateSegment:
        return 0.0


def knee_from_distance(d_hat: float, psi: NDArray, thigh_len: float, shank_ori: NDArray,
                       mid_pelvis: NDArray, ankle: NDArray,
                       policy: InfeasiblePolicy = InfeasiblePolicy.CLAMP) -> float:
    """
    Branch-selected knee angle for a distance, referenced to the knee angle
    implied by the given mid-pelvis and ankle positions.
    """
    rx, rz = shank_ori[:, 0], shank_ori[:, 2]
    u = psi + mid_pelvis - ankle  # hip - knee
    ux, uz = float(u @ rx), float(u @ rz)
    theta_ref = math.atan2(-ux, uz) if math.sqrt(float(u @ u)) > EPS_LEN else 0.0
    pz, px = float(psi @ rz), float(psi @ rx)
    alpha = -2.0 * thigh_len * pz
    beta = 2.0 * thigh_len * px
    gamma = d_hat * d_hat - float(psi @ psi) - thigh_len * thigh_len
    return _solve_trig(alpha, beta, gamma, theta_ref, policy, EPS_COND, d_hat)


def build_pseudo_measurement(x_pred: ArrayLike, pelvis_ori: ArrayLike, shank_ori: ArrayLike,
                             dims: BodyDimensions, meas: DistanceMeasurement,
                             variance: ArrayLike,
                             policy: InfeasiblePolicy | str = InfeasiblePolicy.CLAMP) -> PseudoMeasurement:
    """
    Three measurement rows for ``p_ankle - p_mid_pelvis`` from one distance.

    `x_pred` is the predicted state (vector or :class:`FilterState`); its
    knee angle selects the solution branch. Returns an empty measurement when
    the distance is rejected or the knee equation is ill-conditioned.
    """
    x = np.asarray(getattr(x_pred, "x", x_pred), dtype=float)
    side = meas.side
    theta_ref = predicted_knee_angle(x, pelvis_ori, shank_ori, dims, side)
    psi = compute_psi(pelvis_ori, shank_ori, dims, side)
    try:
        theta = solve_knee_angle(meas.value, psi, dims.thigh(side), shank_ori, theta_ref, policy)
    except (Infeasible, IllConditioned):
        return PseudoMeasurement.empty()
    H = np.zeros((3, N_STATE))
    H[:, POS["mid_pelvis"]] = -np.eye(3)
    H[:, POS[side]] = np.eye(3)
    y = pelvis_ankle_vector(psi, theta, dims.thigh(side), shank_ori)
    var = np.broadcast_to(np.asarray(variance, dtype=float), (3,))
    return PseudoMeasurement(H, y, var.copy())
