import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ckfdist.body import hip_position, knee_angle_from_positions, knee_position
from ckfdist.ckf import (CKFConfig, ContactFlags, FrameInput, Mode, NoiseModel, assemble_measurement,
                         constraint_residuals, constraint_update, iter_filter, kalman_update,
                         limit_covariance, predict, run_filter, step)
from ckfdist.distance import DistanceMeasurement
from ckfdist.errors import FilterStepError, SingularInnovation
from ckfdist.rotations import rot_y
from ckfdist.state import FilterState

ZERO = np.zeros(3)


def frame(dt=0.01, acc=(ZERO, ZERO, ZERO), contacts=(False, False), dist=(None, None), oris=None):
    oris = oris or (np.eye(3), np.eye(3), np.eye(3))
    return FrameInput(dt, *map(np.asarray, acc), *oris, ContactFlags(*contacts),
                      *(None if d is None else DistanceMeasurement(s, d, 0.01)
                        for s, d in zip(("left", "right"), dist)))


def straight_state(dims, mp=(0, 0, 0.95), vel_var=1e-2):
    """Both legs straight and vertical under identity orientations."""
    mp = np.asarray(mp, dtype=float)
    leg = dims.thigh_left + dims.shank_left
    return FilterState.from_positions(mp, mp + [0, 0.115, -leg], mp + [0, -0.115, -leg], vel_var=vel_var)


def test_predict_constant_velocity():
    s = FilterState(np.r_[np.zeros(9), 1, 0, 0, np.zeros(6)], np.zeros((18, 18)))
    out = predict(s, frame(), NoiseModel(accel_var=0.0))
    np.testing.assert_allclose(out.x[0:3], [0.01, 0, 0])
    np.testing.assert_array_equal(out.x[9:12], [1, 0, 0])


def test_predict_free_fall():
    s = FilterState(np.zeros(18), np.eye(18))
    g = np.array([0, 0, -9.81])
    out = predict(s, frame(dt=0.1, acc=(g, g, g)), NoiseModel())
    assert out.x[2] == pytest.approx(-0.04905)
    assert out.x[11] == pytest.approx(-0.981)


def test_predict_identity_when_at_rest():
    P = np.diag(np.r_[np.ones(9), np.zeros(9)])
    s = FilterState(np.r_[np.arange(9.0), np.zeros(9)], P)
    out = predict(s, frame(), NoiseModel(accel_var=0.0))
    np.testing.assert_array_equal(out.x, s.x)
    np.testing.assert_array_equal(out.P, P)


def test_predict_covariance():
    s = FilterState(np.zeros(18), np.eye(18))
    dt, q = 0.02, 0.3
    out = predict(s, frame(dt=dt), NoiseModel(accel_var=q))
    # one axis: F = [[1, dt], [0, 1]], G = [dt^2/2, dt]
    F = np.array([[1, dt], [0, 1]])
    G = np.array([[dt * dt / 2], [dt]])
    ref = F @ F.T + q * G @ G.T
    np.testing.assert_allclose(out.P[np.ix_([4, 13], [4, 13])], ref, rtol=1e-14)


@pytest.mark.parametrize("contacts, dist, rows", [
    ((True, True), (0.9, 0.9), 14),
    ((False, False), (0.9, 0.9), 6),
    ((False, False), (None, None), 0),
    ((True, False), (None, 0.9), 7),
])
def test_measurement_row_counts(dims_simple, contacts, dist, rows):
    s = straight_state(dims_simple)
    H, y, R = assemble_measurement(s, frame(contacts=contacts, dist=dist), dims_simple, NoiseModel())
    assert H.shape == (rows, 18) and y.shape == (rows,) and R.shape == (rows, rows)
    np.testing.assert_array_equal(R, np.diag(np.diag(R)))


def test_measurement_layout(dims_simple):
    noise = NoiseModel(zupt_var=1e-5, floor_var=2e-5, pla_var=[3e-3] * 3)
    s = straight_state(dims_simple)
    H, y, R = assemble_measurement(s, frame(contacts=(True, True), dist=(0.9, 0.9)), dims_simple, noise)
    np.testing.assert_array_equal(H[0:3, 0:3], -np.eye(3))
    np.testing.assert_array_equal(H[0:3, 3:6], np.eye(3))
    np.testing.assert_array_equal(H[3:6, 6:9], np.eye(3))
    np.testing.assert_array_equal(H[6:9, 12:15], np.eye(3))
    assert H[9, 5] == 1 and H[13, 8] == 1
    np.testing.assert_array_equal(H[10:13, 15:18], np.eye(3))
    np.testing.assert_array_equal(np.diag(R), [3e-3] * 6 + [1e-5] * 3 + [2e-5] + [1e-5] * 3 + [2e-5])
    np.testing.assert_array_equal(y[6:], [0, 0, 0, 0, 0, 0, 0, 0])


def test_baseline_ignores_distances(dims_simple):
    s = straight_state(dims_simple)
    a = assemble_measurement(s, frame(dist=(0.9, 0.8)), dims_simple, NoiseModel(), mode="baseline")
    b = assemble_measurement(s, frame(dist=(None, None)), dims_simple, NoiseModel(), mode="baseline")
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
    H, y, _ = a
    assert H.shape == (3, 18)
    assert y[0] == pytest.approx(0.9)


def test_kalman_scalar():
    s = FilterState(np.zeros(18), np.eye(18))
    H = np.zeros((1, 18))
    H[0, 4] = 1
    out = kalman_update(s, H, [2.0], [[1.0]])
    assert out.x[4] == pytest.approx(1.0)
    assert out.P[4, 4] == pytest.approx(0.5)
    np.testing.assert_array_equal(np.delete(out.x, 4), 0)


def test_kalman_exact_measurement():
    s = FilterState(np.zeros(18), np.eye(18))
    H = np.zeros((1, 18))
    H[0, 7] = 1
    out = kalman_update(s, H, [0.3], [[0.0]])
    assert abs(out.x[7] - 0.3) < 1e-9


def test_kalman_empty_and_singular():
    s = FilterState(np.ones(18), np.eye(18))
    assert kalman_update(s, np.zeros((0, 18)), [], np.zeros((0, 0))) is s
    H = np.zeros((2, 18))
    H[:, 0] = 1
    with pytest.raises(SingularInnovation):
        kalman_update(FilterState(np.zeros(18), np.zeros((18, 18))), H, [0, 0], np.zeros((2, 2)))


@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 10))
def test_joint_equals_sequential(seed, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(18, 18))
    s = FilterState(rng.normal(size=18), A @ A.T / 18 + 0.1 * np.eye(18))
    H = rng.normal(size=(m, 18))
    y = rng.normal(size=m)
    r = rng.uniform(0.01, 1.0, m)
    joint = kalman_update(s, H, y, np.diag(r))
    seq = s
    for k in range(m):
        seq = kalman_update(seq, H[k:k + 1], y[k:k + 1], [[r[k]]])
    np.testing.assert_allclose(joint.x, seq.x, atol=1e-8)
    np.testing.assert_allclose(joint.P, seq.P, atol=1e-8)


def test_limit_covariance_examples():
    P = np.diag([0.5, 0.2])
    assert limit_covariance(P, 1.0) is P
    np.testing.assert_allclose(limit_covariance(4 * np.eye(2), 1.0), np.eye(2))
    np.testing.assert_allclose(limit_covariance([[4, 2], [2, 4]], 1.0), [[1, 0.5], [0.5, 1]])


@given(seed=st.integers(0, 2**32 - 1), cap=st.floats(0.01, 5))
def test_limit_covariance_keeps_psd(seed, cap):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(6, 6))
    P0 = A @ A.T
    P = limit_covariance(0.5 * (P0 + P0.T), cap)
    np.testing.assert_array_equal(P, P.T)
    assert np.diag(P).max() <= cap * (1 + 1e-12)
    assert np.linalg.eigvalsh(P).min() >= -1e-10


def test_constraint_fixed_point(dims_simple):
    s = straight_state(dims_simple)
    s.x[[1, 4, 7]] += 0.02  # rigid shift keeps every constraint satisfied
    out = constraint_update(s, frame(), dims_simple)
    np.testing.assert_allclose(out.x, s.x, atol=1e-8)


def test_constraint_restores_thigh_length(dims_simple):
    s = straight_state(dims_simple)
    s.x[5] -= 0.05  # apparent left thigh length 0.50
    out = constraint_update(s, frame(), dims_simple)
    hip = hip_position(out.x[0:3], np.eye(3), dims_simple, "left")
    knee = knee_position(out.x[3:6], np.eye(3), dims_simple.shank_left)
    assert abs(np.linalg.norm(hip - knee) - 0.45) < 1e-6


def test_constraint_enforces_rom(dims_simple):
    s = straight_state(dims_simple)
    mp = s.x[0:3]
    hip = hip_position(mp, np.eye(3), dims_simple, "left")
    theta = -0.2
    knee = hip - 0.45 * (np.array([0, 0, 1]) * np.cos(theta) - np.array([1, 0, 0]) * np.sin(theta))
    s.x[3:6] = knee - [0, 0, 0.45]
    assert knee_angle_from_positions(hip, knee, np.eye(3)) == pytest.approx(-0.2)
    out = constraint_update(s, frame(), dims_simple, rom=(0.0, 2.44))
    hip = hip_position(out.x[0:3], np.eye(3), dims_simple, "left")
    knee = knee_position(out.x[3:6], np.eye(3), 0.45)
    assert abs(knee_angle_from_positions(hip, knee, np.eye(3))) < 1e-6


def test_constraint_singular_falls_back(dims_simple):
    s = straight_state(dims_simple)
    s.x[5] -= 0.05
    s.P[:] = 0.0  # D P D^T = 0
    out = constraint_update(s, frame(), dims_simple)
    res = constraint_residuals(out.x, frame(), dims_simple)
    assert np.abs(res["left"]).max() < 1e-6


@given(vl=st.tuples(*[st.floats(-1, 1)] * 3), vr=st.tuples(*[st.floats(-1, 1)] * 3),
       side=st.sampled_from(["left", "right"]))
def test_zupt_stops_contact_foot(vl, vr, side):
    from ckfdist.body import BodyDimensions
    dims = BodyDimensions(0.23, 0.45, 0.45, 0.45, 0.45)
    s = straight_state(dims, vel_var=1.0)
    s.x[12:15], s.x[15:18] = vl, vr
    cfg = CKFConfig(dims, NoiseModel(zupt_var=1e-8))
    out = step(s, frame(contacts=(side == "left", side == "right")), cfg)
    assert np.linalg.norm(out.ankle_velocity(side)) < 1e-3


def test_step_without_measurements_composes(dims_simple):
    cfg = CKFConfig(dims_simple)
    s = straight_state(dims_simple)
    s.x[9:12] = [0.3, 0.0, 0.1]
    f = frame(acc=(np.array([0.5, 0, 0]), ZERO, ZERO))
    pred = predict(s, f, cfg.noise)
    ref = constraint_update(FilterState(pred.x, limit_covariance(pred.P, cfg.noise.cap_vector())), f,
                            dims_simple, cfg.rom)
    out = step(s, f, cfg)
    np.testing.assert_array_equal(out.x, ref.x)
    np.testing.assert_array_equal(out.P, ref.P)


def _initial(trial, vel_var=1e-6):
    p = trial.truth_pos[0]
    return FilterState.from_positions(p[0:3], p[3:6], p[6:9], pos_var=1e-6, vel_var=vel_var)


def test_exact_distances_beat_dead_reckoning():
    from ckfdist.simulate import simulate_trial
    trial = simulate_trial("walk", sigma_dist=0.0, seed=2, duration=8.0)
    frames = trial.frames()
    X = run_filter(frames, _initial(trial), CKFConfig(trial.dims))
    # dead reckoning: prediction only
    s = _initial(trial)
    dr = [s.x]
    for f in frames[1:]:
        s = predict(s, f, NoiseModel())
        dr.append(s.x)
    dr = np.asarray(dr)
    err = np.linalg.norm((X[:, :9] - trial.truth_pos).reshape(-1, 3, 3), axis=2).max(axis=1)
    err_dr = np.linalg.norm((dr[:, :9] - trial.truth_pos).reshape(-1, 3, 3), axis=2).max(axis=1)
    assert np.all(err <= err_dr + 1e-3)
    assert err[-1] < 0.01 * err_dr[-1]


def test_walk_stride_satisfies_constraints():
    from ckfdist.simulate import simulate_trial
    trial = simulate_trial("walk", sigma_dist=0.05, seed=1, duration=4.0)
    frames = trial.frames()
    cfg = CKFConfig(trial.dims)
    for f, s in zip(frames, iter_filter(frames, _initial(trial), cfg)):
        res = constraint_residuals(s.x, f, trial.dims, cfg.rom)
        assert max(np.abs(r).max() for r in res.values()) < 1e-6
        assert s.is_valid(tol=1e-8)


def test_filter_is_deterministic(walk_trial):
    frames = walk_trial.frames()
    cfg = CKFConfig(walk_trial.dims)
    a = run_filter(frames, _initial(walk_trial), cfg)
    b = run_filter(frames, _initial(walk_trial), cfg)
    assert a.tobytes() == b.tobytes()


def test_filter_error_reports_frame(walk_trial):
    frames = walk_trial.frames()[:50]
    cfg = CKFConfig(walk_trial.dims, NoiseModel(zupt_var=0.0, floor_var=0.0, accel_var=0.0))
    s = _initial(walk_trial, vel_var=0.0)
    s.P[:] = 0.0
    with pytest.raises(FilterStepError) as info:
        run_filter(frames, s, cfg)
    assert isinstance(info.value.cause, SingularInnovation)
    assert info.value.frame >= 1


def test_config_validation(dims_simple):
    with pytest.raises(ValueError):
        NoiseModel(zupt_var=-1)
    with pytest.raises(ValueError):
        NoiseModel(pos_cap=0)
    with pytest.raises(ValueError):
        CKFConfig(dims_simple, rom=(1.0, 0.5))
    assert CKFConfig(dims_simple, mode="baseline").mode is Mode.BASELINE
