"""
Constrained Kalman filter for mid-pelvis and ankle positions.

One filter step is

    predict -> assemble_measurement -> kalman_update -> limit_covariance
            -> constraint_update

Prediction double-integrates world-frame free accelerations. The measurement
update stacks the distance pseudo-measurements (or, in ``baseline`` mode, the
pelvis-position assumptions), then zero-velocity and flat-floor rows for every
foot in floor contact. The constraint update projects the posterior onto the
thigh-length, hinge-knee and knee range-of-motion constraints.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg.lapack import dpotrf, dpotrs

from .body import BodyDimensions, Side, hip_offset
from .distance import (DistanceMeasurement, InfeasiblePolicy, knee_from_distance, pelvis_ankle_vector,
                       wrap_scalar)
from .errors import CKFDistError, FilterStepError, IllConditioned, Infeasible, SingularInnovation
from .state import N_STATE, POS, VEL, FilterState

log = logging.getLogger(__name__)

SIDES: tuple[Side, Side] = ("left", "right")
DEFAULT_ROM = (0.0, np.deg2rad(140.0))


class Mode(str, Enum):
    """Pelvis-position information used by the measurement update."""

    BASELINE = "baseline"
    DISTANCE = "distance"


@dataclass(frozen=True)
class ContactFlags:
    left_foot: bool = False
    right_foot: bool = False

    def __getitem__(self, side: Side) -> bool:
        return self.left_foot if side == "left" else self.right_foot


@dataclass
class FrameInput:
    """
    Exogenous data for one time step.

    `accel_*` are gravity-free world-frame accelerations used for the
    transition from the previous frame to this one. Orientations are 3x3
    segment-to-world rotation matrices. `floor_z` is the ankle height while
    the foot rests on the floor.
    """

    dt: float
    accel_mp: NDArray
    accel_la: NDArray
    accel_ra: NDArray
    pelvis_ori: NDArray
    lshank_ori: NDArray
    rshank_ori: NDArray
    contacts: ContactFlags = field(default_factory=ContactFlags)
    dist_left: DistanceMeasurement | None = None
    dist_right: DistanceMeasurement | None = None
    floor_z: float = 0.0

    def shank_ori(self, side: Side) -> NDArray:
        return self.lshank_ori if side == "left" else self.rshank_ori

    def distance(self, side: Side) -> DistanceMeasurement | None:
        return self.dist_left if side == "left" else self.dist_right

    @property
    def accel(self) -> NDArray:
        return np.concatenate([self.accel_mp, self.accel_la, self.accel_ra])


@dataclass
class NoiseModel:
    """
    Process and pseudo-measurement noise.

    Parameters
    ----------
    accel_var : float or sequence of 3 floats
        Acceleration variance driving the process noise, either shared or per
        point (mid-pelvis, left ankle, right ankle).
    pla_var : sequence of 3 floats, optional
        Fixed per-axis variance of the pelvis-to-ankle vector measurement. When
        None the variance is ``(sigma_dist * pla_scale)**2`` using the sigma
        carried by each distance measurement.
    pla_scale : float
        Ratio between the pseudo-measurement standard deviation and the
        distance noise. The knee solve stretches distance noise along the
        thigh arc, so the vector error per axis is several times sigma_dist;
        3 matches Monte Carlo spreads over typical knee angles.
    pla_min_var : float
        Lower bound on the pelvis-to-ankle variance. Keeps the innovation
        covariance invertible for noise-free distances, since after the
        constraint projection that block of P has rank one.
    zupt_var, floor_var : float
        Variances of the zero-velocity rows and the floor-height row.
    pos_cap, vel_cap : float
        Ceilings for the position and velocity diagonal of P.
    pz_var, pxy_var : float
        Baseline-mode pelvis height and pelvis XY pseudo-measurement variances.
    """

    accel_var: float | Sequence[float] = 0.1
    pla_var: Sequence[float] | None = None
    pla_scale: float = 3.0
    pla_min_var: float = 1e-8
    zupt_var: float = 1e-4
    floor_var: float = 1e-4
    pos_cap: float = 1.0
    vel_cap: float = 1.0
    pz_var: float = 1e-2
    pxy_var: float = 1e-2

    def __post_init__(self):
        variances = [*np.atleast_1d(self.accel_var), self.zupt_var, self.floor_var,
                     self.pz_var, self.pxy_var, self.pla_scale, self.pla_min_var]
        if self.pla_var is not None:
            variances.extend(np.atleast_1d(self.pla_var))
        if any(not v >= 0 for v in variances):
            raise ValueError("noise variances must be non-negative")
        if not (self.pos_cap > 0 and self.vel_cap > 0):
            raise ValueError("covariance caps must be positive")

    def accel_var_vector(self) -> NDArray:
        """Per-state-axis acceleration variance (length 9)."""
        v = np.atleast_1d(np.asarray(self.accel_var, dtype=float))
        return np.repeat(np.broadcast_to(v, (3,)), 3)

    def pla_variance(self, meas: DistanceMeasurement) -> NDArray:
        if self.pla_var is not None:
            v = np.broadcast_to(np.asarray(self.pla_var, dtype=float), (3,))
        else:
            v = np.full(3, (meas.sigma * self.pla_scale) ** 2)
        return np.maximum(v, self.pla_min_var)

    def cap_vector(self) -> NDArray:
        return np.repeat([self.pos_cap, self.vel_cap], 9).astype(float)


@dataclass
class CKFConfig:
    """Everything a filter step needs besides the state and frame."""

    dims: BodyDimensions
    noise: NoiseModel = field(default_factory=NoiseModel)
    rom: tuple[float, float] = DEFAULT_ROM
    policy: InfeasiblePolicy = InfeasiblePolicy.CLAMP
    mode: Mode = Mode.DISTANCE
    iters: int = 5
    tol: float = 1e-8

    def __post_init__(self):
        self.policy = InfeasiblePolicy(self.policy)
        self.mode = Mode(self.mode)
        if not self.rom[0] < self.rom[1]:
            raise ValueError("ROM lower bound must be below the upper bound")


# --------------------------------------------------------------------------- prediction

def predict(state: FilterState, inp: FrameInput, noise: NoiseModel) -> FilterState:
    """
    Constant-acceleration kinematic prediction over ``inp.dt``.

    p <- p + v dt + a dt^2 / 2, v <- v + a dt for every tracked point and
    P <- F P F^T + G diag(accel_var) G^T.
    """
    F, Q = _transition(float(inp.dt), tuple(noise.accel_var_vector()))
    dt = inp.dt
    a = inp.accel
    x = state.x.copy()
    x[:9] += x[9:] * dt + 0.5 * a * dt * dt
    x[9:] += a * dt
    return FilterState(x, F @ state.P @ F.T + Q)


@lru_cache(maxsize=32)
def _transition(dt: float, q: tuple) -> tuple[NDArray, NDArray]:
    F = np.eye(N_STATE)
    F[:9, 9:] = dt * np.eye(9)
    G = np.vstack([0.5 * dt * dt * np.eye(9), dt * np.eye(9)])
    Q = G @ np.diag(q) @ G.T
    F.flags.writeable = False
    Q.flags.writeable = False
    return F, Q


# --------------------------------------------------------------------------- measurement

def assemble_measurement(state_pred: FilterState, inp: FrameInput, dims: BodyDimensions,
                         noise: NoiseModel,
                         policy: InfeasiblePolicy | str = InfeasiblePolicy.CLAMP,
                         mode: Mode | str = Mode.DISTANCE) -> tuple[NDArray, NDArray, NDArray]:
    """
    Stack the measurement rows available for this frame.

    Row order: left distance (3), right distance (3), then a zero-velocity
    and floor block (4) for each foot in contact, left first. In baseline
    mode the distance rows are replaced by the pelvis height row and the
    pelvis-XY-between-ankles rows, placed after the contact blocks.

    Returns
    -------
    H : ndarray, shape (m, 18)
    y : ndarray, shape (m,)
    R : ndarray, shape (m, m), diagonal
    """
    psis = {side: _psi(inp, dims, side) for side in SIDES}
    H, y, var = _stack_rows(state_pred.x, inp, dims, noise, InfeasiblePolicy(policy), Mode(mode), psis)
    return H, y, np.diag(var)


def _stack_rows(x: NDArray, inp: FrameInput, dims: BodyDimensions, noise: NoiseModel,
                policy: InfeasiblePolicy, mode: Mode, psis: dict):
    """(H, y, variances) for one frame; see :func:`assemble_measurement`."""
    rows: list[tuple[str, Side, object]] = []
    if mode is Mode.DISTANCE:
        mp = x[POS["mid_pelvis"]]
        for side in SIDES:
            meas = inp.distance(side)
            if meas is None:
                continue
            R = inp.shank_ori(side)
            try:
                theta = knee_from_distance(meas.value, psis[side], dims.thigh(side), R, mp,
                                           x[POS[side]], policy)
            except (Infeasible, IllConditioned):
                continue
            tau = pelvis_ankle_vector(psis[side], theta, dims.thigh(side), R)
            rows.append(("pla", side, (tau, noise.pla_variance(meas))))
    for side in SIDES:
        if inp.contacts[side]:
            rows.append(("contact", side, None))
    if mode is Mode.BASELINE:
        rows.append(("pelvis", "left", None))

    m = sum(3 if kind != "contact" else 4 for kind, _, _ in rows)
    H = np.zeros((m, N_STATE))
    y = np.zeros(m)
    var = np.zeros(m)
    r = 0
    for kind, side, extra in rows:
        if kind == "pla":
            tau, v = extra
            a = POS[side].start
            for k in range(3):
                H[r + k, k] = -1.0
                H[r + k, a + k] = 1.0
            y[r:r + 3] = tau
            var[r:r + 3] = v
            r += 3
        elif kind == "contact":
            b = VEL[side].start
            for k in range(3):
                H[r + k, b + k] = 1.0
            H[r + 3, POS[side].start + 2] = 1.0
            y[r + 3] = inp.floor_z
            var[r:r + 3] = noise.zupt_var
            var[r + 3] = noise.floor_var
            r += 4
        else:
            la, ra = POS["left"].start, POS["right"].start
            H[r, 2] = 1.0
            y[r] = inp.floor_z + dims.leg_length()
            var[r] = noise.pz_var
            for k in range(2):
                H[r + 1 + k, k] = 1.0
                H[r + 1 + k, la + k] = -0.5
                H[r + 1 + k, ra + k] = -0.5
                var[r + 1 + k] = noise.pxy_var
            r += 3
    return H, y, var


def kalman_update(state_pred: FilterState, H: ArrayLike, y: ArrayLike, R: ArrayLike) -> FilterState:
    """
    Linear Kalman measurement update.

    K = P H^T (H P H^T + R)^-1, x <- x + K (y - H x), P <- (I - K H) P,
    followed by symmetrization. An empty H returns the input unchanged.

    Raises
    ------
    SingularInnovation
        If H P H^T + R cannot be inverted.
    """
    H = np.asarray(H, dtype=float)
    if H.shape[0] == 0:
        return state_pred
    y = np.asarray(y, dtype=float)
    R = np.asarray(R, dtype=float)
    P = state_pred.P
    PHt = P @ H.T
    S = H @ PHt + R
    Kt = _spd_solve(S, PHt.T)
    if Kt is None:
        raise SingularInnovation("innovation covariance H P H^T + R is not invertible")
    K = Kt.T
    x = state_pred.x + K @ (y - H @ state_pred.x)
    P = P - K @ PHt.T
    P = 0.5 * (P + P.T)
    return FilterState(x, P)


def _spd_solve(S: NDArray, B: NDArray) -> NDArray | None:
    """S^-1 B through Cholesky; None unless S is positive definite with condition below ~1e15."""
    c, info = dpotrf(S, lower=1)
    if info != 0:
        return None
    d = np.diagonal(c)
    if d.min() ** 2 <= 1e-15 * d.max() ** 2:
        return None
    return dpotrs(c, B, lower=1)[0]


def limit_covariance(P: ArrayLike, cap: float | ArrayLike) -> NDArray:
    """
    Cap the diagonal of P by symmetric scaling.

    Row and column i are both multiplied by sqrt(cap_i / P_ii) whenever
    P_ii > cap_i, so the result stays symmetric positive semi-definite and
    correlations are preserved.
    """
    P = np.asarray(P, dtype=float)
    d = np.diagonal(P)
    cap = np.broadcast_to(np.asarray(cap, dtype=float), d.shape)
    over = d > cap
    if not np.any(over):
        return P
    s = np.ones_like(d)
    s[over] = np.sqrt(cap[over] / d[over])
    return P * np.outer(s, s)


# --------------------------------------------------------------------------- constraints

def constraint_residuals(x: ArrayLike, inp: FrameInput, dims: BodyDimensions,
                         rom: tuple[float, float] = DEFAULT_ROM) -> dict[str, NDArray]:
    """
    Thigh length error, hinge residual and ROM violation per leg.

    Returns a dict keyed by side holding ``[length_err, hinge_resid, rom_violation]``.
    """
    x = np.asarray(getattr(x, "x", x), dtype=float)
    out = {}
    for side in SIDES:
        u = _thigh_vector(x, inp, dims, side)
        R = inp.shank_ori(side)
        theta = np.arctan2(-u @ R[:, 0], u @ R[:, 2])
        viol = max(rom[0] - theta, theta - rom[1], 0.0)
        out[side] = np.array([np.linalg.norm(u) - dims.thigh(side), u @ R[:, 1], viol])
    return out


def _psi(inp: FrameInput, dims: BodyDimensions, side: Side) -> NDArray:
    return hip_offset(inp.pelvis_ori, dims.pelvis_width, side) - dims.shank(side) * inp.shank_ori(side)[:, 2]


def _thigh_vector(x: NDArray, inp: FrameInput, dims: BodyDimensions, side: Side) -> NDArray:
    """hip - knee as a function of the state."""
    return _psi(inp, dims, side) + x[POS["mid_pelvis"]] - x[POS[side]]


def _nearest_bound(theta: float, rom: tuple[float, float]) -> float:
    lo, hi = rom
    return lo if abs(wrap_scalar(theta - lo)) <= abs(wrap_scalar(theta - hi)) else hi


def _leg_geometry(inp: FrameInput, dims: BodyDimensions, psis: dict | None = None):
    psis = psis or {side: _psi(inp, dims, side) for side in SIDES}
    legs = []
    for side in SIDES:
        R = np.ascontiguousarray(inp.shank_ori(side).T)  # rows are r_x, r_y, r_z
        legs.append((side, POS[side].start, psis[side], R[0], R[1], R[2], dims.thigh(side)))
    return legs


def _linearize(x: NDArray, legs, active: dict) -> tuple[NDArray, NDArray]:
    """Stacked residual g(x) - target and Jacobian D over all 18 states."""
    m = 4 + len(active)
    D = np.zeros((m, N_STATE))
    r = np.zeros(m)
    i = 0
    for side, a, psi, rx, ry, rz, length in legs:
        u = psi + x[0:3] - x[a:a + 3]
        n = math.sqrt(u @ u)
        grads = [u / n, ry]
        r[i], r[i + 1] = n - length, u @ ry
        if side in active:
            p, q = -(u @ rx), u @ rz
            grads.append((q * -rx - p * rz) / (p * p + q * q))
            r[i + 2] = wrap_scalar(math.atan2(p, q) - active[side])
        for g in grads:
            D[i, 0:3] = g
            D[i, a:a + 3] = -g
            i += 1
    return r, D


def _update_active(x: NDArray, legs, active: dict, rom: tuple[float, float]) -> None:
    for side, a, psi, rx, _, rz, _ in legs:
        if side in active:
            continue
        u = psi + x[0:3] - x[a:a + 3]
        theta = math.atan2(-(u @ rx), u @ rz)
        if theta < rom[0] or theta > rom[1]:
            active[side] = _nearest_bound(theta, rom)


def _weighted_projector(P: NDArray, D: NDArray):
    """P D^T (D P D^T)^-1, or None when D P D^T is numerically singular."""
    PDt = P @ D.T
    X = _spd_solve(D @ PDt, PDt.T)
    return None if X is None else X.T


def _plain_projector(D: NDArray) -> NDArray:
    return np.linalg.pinv(D)


def constraint_update(state: FilterState, inp: FrameInput, dims: BodyDimensions,
                      rom: tuple[float, float] = DEFAULT_ROM, iters: int = 5,
                      tol: float = 1e-8) -> FilterState:
    """
    Project the state onto the biomechanical constraints of both legs.

    Per leg: ``|hip - knee| = thigh length``, ``(hip - knee) . r_y^shank = 0``
    and, when the knee angle leaves `rom`, ``theta = nearest bound``. The
    nonlinear constraints are linearized repeatedly and the state moved by the
    minimum-variance correction ``K (g - target)``, ``K = P D^T (D P D^T)^-1``,
    until the largest residual is below `tol` or `iters` steps were taken.
    The covariance is projected once with the final Jacobian,
    ``P <- (I - K D) P (I - K D)^T``, which equals ``(I - K D) P`` for the
    minimum-variance gain. If D P D^T is singular the unweighted projection
    through pinv(D) is used instead.
    """
    return _constrain(state, _leg_geometry(inp, dims), rom, iters, tol)


def _constrain(state: FilterState, legs, rom, iters: int, tol: float) -> FilterState:
    x = state.x.copy()
    P = state.P
    active: dict = {}
    weighted = True

    def gain(D):
        nonlocal weighted
        K = _weighted_projector(P, D) if weighted else None
        if K is None:
            if weighted:
                log.debug("D P D^T singular; using unweighted constraint projection")
            weighted = False
            K = _plain_projector(D)
        return K

    _update_active(x, legs, active, rom)
    r, D = _linearize(x, legs, active)
    for _ in range(iters):
        if np.abs(r).max() < tol:
            break
        x = x - gain(D) @ r
        _update_active(x, legs, active, rom)
        r, D = _linearize(x, legs, active)
    A = np.eye(N_STATE) - gain(D) @ D
    P = A @ P @ A.T
    P = 0.5 * (P + P.T)
    return FilterState(x, P)


# --------------------------------------------------------------------------- loop

def step(state: FilterState, inp: FrameInput, config: CKFConfig) -> FilterState:
    """One full filter cycle for a frame."""
    pred = predict(state, inp, config.noise)
    psis = {side: _psi(inp, config.dims, side) for side in SIDES}
    H, y, var = _stack_rows(pred.x, inp, config.dims, config.noise, config.policy, config.mode, psis)
    post = kalman_update(pred, H, y, np.diag(var))
    post = FilterState(post.x, limit_covariance(post.P, config.noise.cap_vector()))
    legs = _leg_geometry(inp, config.dims, psis)
    return _constrain(post, legs, config.rom, config.iters, config.tol)


def iter_filter(frames: Iterable[FrameInput], initial: FilterState,
                config: CKFConfig) -> Iterator[FilterState]:
    """
    Yield the posterior state for every frame, starting with `initial`,
    which describes the first frame.

    Raises
    ------
    FilterStepError
        Wrapping any package error raised by a step, with the frame index.
    """
    it = iter(frames)
    if next(it, None) is None:
        return
    state = initial
    yield state
    for k, inp in enumerate(it, start=1):
        try:
            state = step(state, inp, config)
        except CKFDistError as exc:
            raise FilterStepError(k, exc) from exc
        yield state


def run_filter(frames: Iterable[FrameInput], initial: FilterState, config: CKFConfig) -> NDArray:
    """State vectors of :func:`iter_filter` stacked into shape (n_frames, 18)."""
    return np.asarray([s.x for s in iter_filter(frames, initial, config)])
