"""
Synthetic lower-body motion and the sensor streams derived from it.

Motion is planned foot-first: a smooth pelvis path (curvature-continuous) is
sampled at a gait schedule to place footprints, swing ankles follow
minimum-jerk arcs between footprints, and each leg is closed by hinge-knee
inverse kinematics from hip to ankle. Stance ankles are therefore exactly at
rest on the floor and every pose satisfies the segment-length and hinge
constraints by construction. All trajectories are at least C2 in time.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

from .body import BodyDimensions
from .ckf import ContactFlags, FrameInput
from .distance import DistanceMeasurement
from .errors import InvalidPreset
from .metrics import ANGLE_NAMES  # noqa: F401
from .rotations import euler_yxz, matrix_to_quat, quat_to_matrix, rot_x, rot_y, rot_z

KNEE_MAX = np.deg2rad(140.0)
KNEE_MIN = np.deg2rad(1.0)

SIGMA_DIST_SWEEP = (0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.15, 0.2)


@dataclass(frozen=True)
class MotionPreset:
    """
    Parameters of one scripted movement.

    Lengths are in meters, angles in radians. `pelvis_height` is a fraction of
    the straight-leg length. `swing_offset` is the (forward, inward, up) peak
    excursion of the swing ankle away from the straight line between
    footprints. `turns` lists (straight length, turn angle, turn length)
    segments repeated along the path; it is ignored for on-the-spot presets
    (speed 0).
    """

    name: str
    duration: float = 30.0
    cadence: float = 120.0
    duty: float = 0.55
    in_phase: bool = False
    speed: float = 0.9
    turns: tuple[tuple[float, float, float], ...] = ((4.0, np.pi, 3.0),)
    pelvis_height: float = 0.94
    bounce: float = 0.035
    bounce_phase: float = 0.0
    sway: float = 0.02
    step_width: float | None = None
    width_alternation: float = 0.0
    swing_offset: tuple[float, float, float] = (0.0, 0.0, 0.10)
    pelvis_rotation: float = np.deg2rad(4.0)
    pelvis_obliquity: float = np.deg2rad(3.0)
    pelvis_tilt: float = np.deg2rad(5.0)
    rest: float = 1.0
    ramp: float = 1.5
    group: str = "F"

    def validate(self) -> None:
        if not self.duration > 0:
            raise InvalidPreset("duration must be positive")
        if not 0 < self.duty < 1:
            raise InvalidPreset("duty factor must lie in (0, 1)")
        if not self.cadence > 0:
            raise InvalidPreset("cadence must be positive")
        if not 0 < self.pelvis_height < 1:
            raise InvalidPreset("pelvis height must be a fraction of leg length in (0, 1)")
        if self.speed < 0 or self.bounce < 0 or self.sway < 0:
            raise InvalidPreset("speed, bounce and sway must be non-negative")
        if self.swing_offset[2] < 0:
            raise InvalidPreset("swing lift must be non-negative")
        for amp in (self.pelvis_rotation, self.pelvis_obliquity):
            if abs(amp) > np.deg2rad(30):
                raise InvalidPreset("pelvis oscillation amplitude beyond 30 degrees")

    @property
    def stride_time(self) -> float:
        return 120.0 / self.cadence


PRESETS: dict[str, MotionPreset] = {
    p.name: p for p in [
        MotionPreset("walk"),
        MotionPreset("figure8", duration=60.0, turns=((0.0, 2 * np.pi, 9.0), (0.0, -2 * np.pi, 9.0))),
        MotionPreset("zigzag", duration=60.0,
                     turns=((1.5, np.deg2rad(60), 1.6), (1.5, -np.deg2rad(120), 2.6),
                            (1.5, np.deg2rad(60), 1.6))),
        MotionPreset("tug_turn", speed=0.6, cadence=105.0, duty=0.6, turns=((3.0, np.pi, 2.4),),
                     pelvis_height=0.9, bounce=0.03, group="D"),
        MotionPreset("jog", cadence=165.0, duty=0.36, speed=1.8, turns=((6.0, np.pi, 4.0),),
                     pelvis_height=0.86, bounce=0.02, bounce_phase=np.pi,
                     swing_offset=(-0.12, 0.0, 0.25), group="D"),
        MotionPreset("high_knee", cadence=160.0, duty=0.4, speed=0.0, pelvis_height=0.93,
                     bounce=0.03, bounce_phase=np.pi, sway=0.01,
                     swing_offset=(0.30, 0.0, 0.42), pelvis_rotation=np.deg2rad(2.0), group="D"),
        MotionPreset("speedskater", cadence=70.0, duty=0.42, speed=0.0, pelvis_height=0.8,
                     bounce=0.04, bounce_phase=np.pi, sway=0.32, step_width=0.9,
                     swing_offset=(-0.40, 0.40, 0.14), pelvis_rotation=np.deg2rad(8.0),
                     pelvis_obliquity=np.deg2rad(6.0), pelvis_tilt=np.deg2rad(20.0), group="D"),
        MotionPreset("jumping_jacks", cadence=120.0, duty=0.6, in_phase=True, speed=0.0,
                     pelvis_height=0.88, bounce=0.03, bounce_phase=np.pi, sway=0.0,
                     step_width=0.3, width_alternation=0.2, swing_offset=(0.0, 0.0, 0.06),
                     pelvis_rotation=0.0, pelvis_obliquity=0.0, group="D"),
    ]
}

STANDING = MotionPreset("standing", speed=0.0, bounce=0.0, sway=0.0, swing_offset=(0.0, 0.0, 0.0),
                        pelvis_rotation=0.0, pelvis_obliquity=0.0, pelvis_tilt=0.0)


def get_preset(name: str | MotionPreset, **overrides) -> MotionPreset:
    """Look up a named preset and apply field overrides."""
    if isinstance(name, MotionPreset):
        preset = name
    elif name == "standing":
        preset = STANDING
    else:
        try:
            preset = PRESETS[name]
        except KeyError:
            raise InvalidPreset(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(preset, **overrides) if overrides else preset


@dataclass
class TrialData:
    """
    One synthetic trial: ground truth plus the sensor streams fed to the filter.

    Per-frame arrays share their first axis. Positions are stacked as
    (mid-pelvis, left ankle, right ankle) x (x, y, z); orientations as
    (pelvis, left shank, right shank) unit quaternions w-x-y-z; truth angles
    follow :data:`ANGLE_NAMES` in radians. `truth_accel` and `accel` hold,
    for frame k, the (noise-free / measured) acceleration used to move from
    frame k-1 to frame k. Missing distance samples are NaN.
    """

    sample_rate: float
    dims: BodyDimensions
    time: NDArray
    truth_pos: NDArray
    truth_quat: NDArray
    truth_angles: NDArray
    contacts: NDArray
    truth_accel: NDArray
    accel: NDArray | None = None
    quat: NDArray | None = None
    dist: NDArray | None = None
    floor_z: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.time)

    @property
    def has_streams(self) -> bool:
        return self.accel is not None

    def truth_rotations(self) -> NDArray:
        """Truth orientations as matrices, shape (N, 3, 3, 3)."""
        return quat_to_matrix(self.truth_quat.reshape(-1, 3, 4))

    def sensor_rotations(self) -> NDArray:
        """Orientations seen by the filter, shape (N, 3, 3, 3)."""
        return quat_to_matrix(self.quat.reshape(-1, 3, 4))

    def frames(self) -> list[FrameInput]:
        """Filter inputs, one per sample."""
        if not self.has_streams:
            raise ValueError("sensor streams not derived yet; call derive_sensor_streams")
        dt = 1.0 / self.sample_rate
        R = self.sensor_rotations()
        sigma = float(self.meta.get("sigma_dist", 0.0))
        out = []
        for k in range(len(self)):
            dl, dr = self.dist[k]
            out.append(FrameInput(
                dt=dt,
                accel_mp=self.accel[k, 0:3], accel_la=self.accel[k, 3:6], accel_ra=self.accel[k, 6:9],
                pelvis_ori=R[k, 0], lshank_ori=R[k, 1], rshank_ori=R[k, 2],
                contacts=ContactFlags(bool(self.contacts[k, 0]), bool(self.contacts[k, 1])),
                dist_left=None if np.isnan(dl) else DistanceMeasurement("left", float(dl), sigma),
                dist_right=None if np.isnan(dr) else DistanceMeasurement("right", float(dr), sigma),
                floor_z=self.floor_z,
            ))
        return out


# --------------------------------------------------------------------------- path

def _smoothstep(x: NDArray) -> NDArray:
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10 - 15 * x + 6 * x * x)


def _smoothstep_integral(x: NDArray) -> NDArray:
    x = np.clip(x, 0.0, 1.0)
    return x ** 4 * (2.5 - 3 * x + x * x)


def _bump(x: NDArray) -> NDArray:
    """64 x^3 (1-x)^3 on [0, 1]: unit peak, zero value, slope and curvature at the ends."""
    x = np.clip(x, 0.0, 1.0)
    return 64.0 * x ** 3 * (1 - x) ** 3


class _Path:
    """Curvature-continuous planar path parametrized by arc length."""

    def __init__(self, turns, length: float, heading0: float, ds: float = 0.002):
        n = int(np.ceil(length / ds)) + 2
        s = np.arange(n) * ds
        if turns and sum(st + tl for st, _, tl in turns) > 0:
            heading = self._heading(s, turns, heading0)
        else:
            heading = np.full(n, heading0)
        xy = np.column_stack([cumulative_trapezoid(np.cos(heading), s, initial=0.0),
                              cumulative_trapezoid(np.sin(heading), s, initial=0.0)])
        self._xy = CubicSpline(s, xy)
        self._h = CubicSpline(s, heading)
        self.length = s[-1]

    @staticmethod
    def _heading(s, turns, heading0):
        """Heading along s; turns use a raised-cosine curvature profile."""
        heading = np.empty_like(s)
        pos, h = 0.0, heading0
        while pos <= s[-1]:
            for straight, angle, turn_len in turns:
                m = (s >= pos) & (s < pos + straight)
                heading[m] = h
                pos += straight
                if turn_len > 0:
                    m = (s >= pos) & (s < pos + turn_len)
                    sig = (s[m] - pos) / turn_len
                    heading[m] = h + angle * (sig - np.sin(2 * np.pi * sig) / (2 * np.pi))
                    pos += turn_len
                    h += angle
        return heading

    def __call__(self, s: NDArray) -> tuple[NDArray, NDArray]:
        s = np.clip(s, 0.0, self.length)
        return self._xy(s), self._h(s)


# --------------------------------------------------------------------------- motion plan

class _MotionPlan:
    """Evaluates mid-pelvis, pelvis orientation and ankle positions at any time."""

    def __init__(self, preset: MotionPreset, dims: BodyDimensions, seed: int):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
        self.p = preset
        self.dims = dims
        self.heading0 = float(rng.uniform(-np.pi, np.pi))
        self.origin = rng.uniform(-1.0, 1.0, 2)
        self.t0 = preset.rest
        self.T = preset.stride_time
        self.width = dims.pelvis_width if preset.step_width is None else preset.step_width
        self.leg = dims.leg_length()
        length = preset.speed * (preset.duration + 2 * self.T) + 1.0
        self.path = _Path(preset.turns if preset.speed > 0 else (), length, self.heading0)
        self._build_schedule()

    # -- timing
    def envelope(self, t):
        return _smoothstep((np.asarray(t) - self.t0) / self.p.ramp)

    def arc_length(self, t):
        t = np.asarray(t, dtype=float)
        r = self.p.ramp
        tau = (t - self.t0) / r
        s = r * _smoothstep_integral(tau) + np.where(tau > 1, t - self.t0 - r, 0.0)
        return self.p.speed * s

    def gait_phase(self, t):
        return 2 * np.pi * (np.asarray(t) - self.t0) / self.T

    # -- pelvis
    def pelvis(self, t):
        t = np.asarray(t, dtype=float)
        p = self.p
        e = self.envelope(t)
        xy, h = self.path(self.arc_length(t))
        ph = self.gait_phase(t)
        # right foot lifts at phase 0: weight shifts towards the left stance foot
        sway = e * p.sway * np.sin(ph) * (0.0 if p.in_phase else 1.0)
        normal = np.column_stack([-np.sin(h), np.cos(h)])
        xy = xy + self.origin + sway[:, None] * normal
        # bounce_phase 0: pelvis highest at mid-stance (walking); pi: lowest (running)
        mid_stance = 2 * np.pi * (1 - 0.5 * p.duty)
        z = self.leg * p.pelvis_height + e * p.bounce * np.cos(2 * (ph - mid_stance) + p.bounce_phase)
        pos = np.column_stack([xy, z])
        yaw = h + e * p.pelvis_rotation * np.sin(ph)
        roll = e * p.pelvis_obliquity * np.sin(ph) * (0.0 if p.in_phase else 1.0)
        pitch = p.pelvis_tilt * (0.5 + 0.5 * e * np.cos(2 * ph))
        R = rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)
        return pos, R

    # -- feet
    def _ground_point(self, s, lateral):
        """World XY of a point `lateral` meters left of the path at arc length `s`."""
        xy, h = self.path(np.atleast_1d(s))
        normal = np.column_stack([-np.sin(h), np.cos(h)])
        return xy + self.origin + np.asarray(lateral)[..., None] * normal, h

    def _build_schedule(self):
        p, T = self.p, self.T
        swing = (1 - p.duty) * T
        n_cycles = int(np.ceil((p.duration + 2 * T) / T)) + 1
        self.feet = {}
        for side, sign, phase in (("left", 1.0, 0.0 if p.in_phase else 0.5), ("right", -1.0, 0.0)):
            offs = self.t0 + (phase + np.arange(n_cycles)) * T
            ons = offs + swing
            # footprints as (arc length, lateral offset) of the path at mid-stance
            mids = ons + 0.5 * p.duty * T
            print_s = np.r_[self.arc_length(0.0), self.arc_length(mids)]
            wide = np.where(np.arange(n_cycles) % 2 == 0, p.width_alternation, 0.0)
            print_lat = sign * 0.5 * np.r_[self.width, self.width + 2 * wide]
            _, hd = self.path(self.arc_length(0.5 * (offs + ons)))
            env = self.envelope(0.5 * (offs + ons))
            fwd, inward, up = p.swing_offset
            zero = np.zeros_like(hd)
            offset = env[:, None] * (
                fwd * np.column_stack([np.cos(hd), np.sin(hd), zero])
                - sign * inward * np.column_stack([-np.sin(hd), np.cos(hd), zero])
                + up * np.column_stack([zero, zero, 1 + zero]))
            travel = (np.abs(np.diff(print_s)) + np.abs(np.diff(print_lat))
                      + np.linalg.norm(offset, axis=1))
            self.feet[side] = dict(offs=offs, ons=ons, s=print_s, lat=print_lat, offset=offset,
                                   moving=travel > 1e-12)

    def ankle(self, t, side):
        t = np.asarray(t, dtype=float)
        f = self.feet[side]
        offs, ons = f["offs"], f["ons"]
        # index of the last lift-off at or before t; -1 before the first
        j = np.searchsorted(offs, t, side="right") - 1
        jj = np.clip(j, 0, len(offs) - 1)
        in_swing = (j >= 0) & (t < ons[jj])
        # stance on footprint j + 1 (or 0 before the first lift-off)
        k = np.where(j < 0, 0, jj + 1)
        s, lat = f["s"][k], f["lat"][k]
        tau = np.where(in_swing, (t - offs[jj]) / (ons[jj] - offs[jj]), 1.0)
        blend = _smoothstep(tau)
        s = np.where(in_swing, f["s"][jj] + blend * (f["s"][jj + 1] - f["s"][jj]), s)
        lat = np.where(in_swing, f["lat"][jj] + blend * (f["lat"][jj + 1] - f["lat"][jj]), lat)
        pos = np.zeros((len(t), 3))
        pos[:, :2] = self._ground_point(s, lat)[0]
        pos += (_bump(tau) * in_swing)[:, None] * f["offset"][jj]
        contact = ~in_swing | ~f["moving"][jj]
        return pos, contact


# --------------------------------------------------------------------------- kinematics

def _leg_ik(hip: NDArray, ankle: NDArray, pelvis_R: NDArray, thigh: float, shank: float):
    """Hinge-knee inverse kinematics. Returns (shank R, thigh R, knee angle)."""
    h = hip - ankle
    hn = np.linalg.norm(h, axis=1)
    hu = h / hn[:, None]
    ry = pelvis_R[:, :, 1]
    n = ry - np.sum(ry * hu, axis=1)[:, None] * hu
    n /= np.linalg.norm(n, axis=1)[:, None]
    w = np.cross(n, hu)
    cos_knee = (hn ** 2 - thigh ** 2 - shank ** 2) / (2 * thigh * shank)
    cos_ankle = (shank ** 2 + hn ** 2 - thigh ** 2) / (2 * shank * hn)
    if np.any(np.abs(cos_knee) > 1) or np.any(np.abs(cos_ankle) > 1):
        raise InvalidPreset("ankle out of reach of the hip")
    theta = np.arccos(cos_knee)
    phi = np.arccos(cos_ankle)
    rz = np.cos(phi)[:, None] * hu + np.sin(phi)[:, None] * w
    shank_R = np.stack([np.cross(n, rz), n, rz], axis=-1)
    knee = ankle + shank * rz
    tz = (hip - knee) / thigh
    thigh_R = np.stack([np.cross(n, tz), n, tz], axis=-1)
    return shank_R, thigh_R, theta


def _poses(plan: _MotionPlan, t: NDArray):
    dims = plan.dims
    mp, Rp = plan.pelvis(t)
    la, cl = plan.ankle(t, "left")
    ra, cr = plan.ankle(t, "right")
    ry = Rp[:, :, 1]
    out = {"mp": mp, "la": la, "ra": ra, "Rp": Rp, "contacts": np.column_stack([cl, cr])}
    for side, ankle, sign in (("left", la, 1.0), ("right", ra, -1.0)):
        hip = mp + sign * 0.5 * dims.pelvis_width * ry
        Rs, Rt, theta = _leg_ik(hip, ankle, Rp, dims.thigh(side), dims.shank(side))
        out[side] = (Rs, Rt, theta)
    return out


def generate_truth(preset: str | MotionPreset, dims: BodyDimensions | None = None,
                   sample_rate: float = 100.0, seed: int = 0) -> TrialData:
    """
    Ground-truth trial for a motion preset (no sensor streams yet).

    The random seed only sets the starting heading and position of the path.

    Raises
    ------
    InvalidPreset
        For inadmissible parameters, unreachable ankles or knee angles
        outside the admissible range.
    """
    preset = get_preset(preset)
    preset.validate()
    dims = dims or BodyDimensions.from_height()
    n = int(round(preset.duration * sample_rate))
    t = np.arange(n) / sample_rate
    plan = _MotionPlan(preset, dims, seed)
    poses = _poses(plan, t)

    knees = np.column_stack([poses["left"][2], poses["right"][2]])
    if knees.max() > KNEE_MAX or knees.min() < KNEE_MIN:
        raise InvalidPreset(
            f"knee angle range [{np.rad2deg(knees.min()):.1f}, {np.rad2deg(knees.max()):.1f}] deg "
            f"outside [{np.rad2deg(KNEE_MIN):.0f}, {np.rad2deg(KNEE_MAX):.0f}] deg")

    Rp = poses["Rp"]
    quat = matrix_to_quat(np.stack([Rp, poses["left"][0], poses["right"][0]], axis=1))
    hips = []
    for side in ("left", "right"):
        rel = np.swapaxes(Rp, 1, 2) @ poses[side][1]
        hips.append(euler_yxz(rel))
    angles = np.column_stack([hips[0], hips[1], knees])

    return TrialData(
        sample_rate=float(sample_rate),
        dims=dims,
        time=t,
        truth_pos=np.column_stack([poses["mp"], poses["la"], poses["ra"]]),
        truth_quat=quat.reshape(n, 12),
        truth_angles=angles,
        contacts=poses["contacts"],
        truth_accel=_plan_accelerations(plan, t, 1.0 / sample_rate),
        floor_z=0.0,
        meta={"preset": preset.name, "seed": int(seed), "group": preset.group},
    )


def _plan_accelerations(plan: _MotionPlan, t: NDArray, dt: float) -> NDArray:
    """
    Mean acceleration over each sample interval [t - dt, t]: the change of the
    central-difference velocity across the interval divided by dt. Velocities
    integrated from these values are exact at the samples.
    """

    def pos(tt):
        mp, _ = plan.pelvis(tt)
        return np.column_stack([mp, plan.ankle(tt, "left")[0], plan.ankle(tt, "right")[0]])

    h = 1e-2 * dt

    def vel(tt):
        return (pos(tt + h) - pos(tt - h)) / (2 * h)

    return (vel(t) - vel(t - dt)) / dt


def derive_sensor_streams(truth: TrialData, sigma_dist: float = 0.0, accel_noise: float = 0.02,
                          ori_noise: float = 0.0, seed: int | None = None) -> TrialData:
    """
    Add the filter inputs to a truth trial.

    Accelerations are interval means from central differences of the true
    positions (see :func:`_plan_accelerations`) plus white Gaussian noise of
    standard deviation `accel_noise`. Orientations are the true ones, rotated
    by small random angles of standard deviation `ori_noise` (rad) if
    requested. Distances are the true mid-pelvis to ankle distances plus
    N(0, sigma_dist^2), clipped at zero.

    Independent random streams are used for acceleration, orientation and
    distance noise, so changing `sigma_dist` leaves the other streams intact.
    """
    if sigma_dist < 0 or accel_noise < 0 or ori_noise < 0:
        raise ValueError("noise levels must be non-negative")
    seed = truth.meta.get("seed", 0) if seed is None else seed
    n = len(truth)
    acc = truth.truth_accel
    rng_acc = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    rng_ori = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    rng_dist = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    acc = acc + rng_acc.normal(0.0, accel_noise, acc.shape) if accel_noise > 0 else acc

    quat = truth.truth_quat.copy()
    if ori_noise > 0:
        R = truth.truth_rotations()
        v = rng_ori.normal(0.0, ori_noise, (n, 3, 3))
        quat = matrix_to_quat(R @ Rotation.from_rotvec(v.reshape(-1, 3)).as_matrix().reshape(n, 3, 3, 3)).reshape(n, 12)

    mp = truth.truth_pos[:, 0:3]
    true_d = np.column_stack([np.linalg.norm(truth.truth_pos[:, 3:6] - mp, axis=1),
                              np.linalg.norm(truth.truth_pos[:, 6:9] - mp, axis=1)])
    dist = true_d + rng_dist.normal(0.0, sigma_dist, true_d.shape) if sigma_dist > 0 else true_d.copy()
    dist = np.maximum(dist, 0.0)

    meta = dict(truth.meta, sigma_dist=float(sigma_dist), accel_noise=float(accel_noise),
                ori_noise=float(ori_noise), noise_seed=int(seed))
    return replace(truth, accel=acc, quat=quat, dist=dist, meta=meta)


def simulate_trial(preset: str | MotionPreset = "walk", sigma_dist: float = 0.0, seed: int = 0,
                   dims: BodyDimensions | None = None, sample_rate: float = 100.0,
                   accel_noise: float = 0.02, ori_noise: float = 0.0, **overrides) -> TrialData:
    """Truth plus sensor streams in one call."""
    truth = generate_truth(get_preset(preset, **overrides), dims, sample_rate, seed)
    return derive_sensor_streams(truth, sigma_dist, accel_noise, ori_noise, seed)
