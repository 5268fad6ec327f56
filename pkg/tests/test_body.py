import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ckfdist.body import (BodyDimensions, hip_position, knee_angle_from_positions, knee_position,
                          thigh_orientation)
from ckfdist.errors import DegenerateSegment
from ckfdist.rotations import is_rotation, rot_y, rot_z

from conftest import random_rotation

angles = st.floats(-np.pi + 1e-6, np.pi - 1e-6)
seeds = st.integers(0, 2**32 - 1)


def test_hip_position_identity(dims_simple):
    np.testing.assert_allclose(hip_position([0, 0, 1], np.eye(3), dims_simple, "left"), [0, 0.115, 1])
    np.testing.assert_allclose(hip_position([0, 0, 1], np.eye(3), dims_simple, "right"), [0, -0.115, 1])


def test_hip_position_rotated_pelvis(dims_simple):
    hip = hip_position([0, 0, 1], rot_z(np.pi / 2), dims_simple, "left")
    np.testing.assert_allclose(hip, [-0.115, 0, 1], atol=1e-15)


def test_zero_width_pelvis_is_rejected():
    # lengths must be strictly positive, so a zero-width pelvis is modelled as a tiny one
    with pytest.raises(ValueError):
        BodyDimensions(0.0, 0.45, 0.45, 0.45, 0.45)
    dims = BodyDimensions(1e-300, 0.45, 0.45, 0.45, 0.45)
    for side in ("left", "right"):
        np.testing.assert_allclose(hip_position([1, 2, 3], np.eye(3), dims, side), [1, 2, 3])


def test_from_height_ratios():
    d = BodyDimensions.from_height(2.0)
    assert d.thigh_left == pytest.approx(0.49)
    assert d.shank_right == pytest.approx(0.492)
    assert d.pelvis_width == pytest.approx(0.27)
    assert d.leg_length() == pytest.approx(0.982)


def test_knee_position_examples():
    np.testing.assert_allclose(knee_position([0, 0, 0], np.eye(3), 0.45), [0, 0, 0.45])
    np.testing.assert_allclose(knee_position([1, 2, 3], np.eye(3), 0.0), [1, 2, 3])
    np.testing.assert_allclose(knee_position([1, 0, 0], rot_y(np.pi / 2), 0.45), [1.45, 0, 0], atol=1e-15)


def test_knee_angle_examples():
    assert knee_angle_from_positions([0, 0, 0.9], [0, 0, 0.45], np.eye(3)) == 0.0
    assert knee_angle_from_positions([-0.45, 0, 0.45], [0, 0, 0.45], np.eye(3)) == pytest.approx(np.pi / 2)
    with pytest.raises(DegenerateSegment):
        knee_angle_from_positions([0, 0, 1], [0, 0, 1], np.eye(3))


def test_thigh_orientation_examples():
    np.testing.assert_allclose(thigh_orientation([0, 0, 0.9], [0, 0, 0.45], np.eye(3)), np.eye(3))
    R = thigh_orientation([-0.45, 0, 0.45], [0, 0, 0.45], np.eye(3))
    np.testing.assert_allclose(R[:, 2], [-1, 0, 0])
    np.testing.assert_allclose(R[:, 1], [0, 1, 0])
    np.testing.assert_allclose(R[:, 0], [0, 0, 1])  # r_y x r_z
    with pytest.raises(DegenerateSegment):
        thigh_orientation([0, 0, 1], [0, 0, 1], np.eye(3))


@given(theta=angles, seed=seeds, thigh=st.floats(0.05, 1.0),
       hip=st.tuples(*[st.floats(-5, 5)] * 3))
def test_knee_angle_round_trip(theta, seed, thigh, hip):
    R = random_rotation(seed)
    hip = np.array(hip)
    knee = hip - thigh * (R[:, 2] * np.cos(theta) - R[:, 0] * np.sin(theta))
    assert abs(knee_angle_from_positions(hip, knee, R) - theta) < 1e-9


@given(seed=seeds, mp=st.tuples(*[st.floats(-5, 5)] * 3), width=st.floats(0.01, 0.5))
def test_hips_mirror_through_mid_pelvis(seed, mp, width):
    dims = BodyDimensions(width, 0.4, 0.4, 0.4, 0.4)
    R = random_rotation(seed)
    left = hip_position(mp, R, dims, "left")
    right = hip_position(mp, R, dims, "right")
    np.testing.assert_allclose(0.5 * (left + right), mp, atol=1e-12)
    np.testing.assert_allclose(left - right, width * R[:, 1], atol=1e-12)


@given(seed=seeds, hip=st.tuples(*[st.floats(-2, 2)] * 3), knee=st.tuples(*[st.floats(-2, 2)] * 3))
def test_thigh_orientation_is_rotation(seed, hip, knee):
    hip, knee = np.array(hip), np.array(knee)
    if np.linalg.norm(hip - knee) <= 1e-3:
        return
    assert is_rotation(thigh_orientation(hip, knee, random_rotation(seed)), tol=1e-9)
