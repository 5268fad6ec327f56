"""
Small rotation helpers.

Rotation matrices map a segment frame into the world frame, so their columns
are the segment basis vectors r_x, r_y, r_z expressed in world coordinates.
Quaternions are stored scalar-first (w, x, y, z). All functions accept either
a single rotation or a stack with the rotation in the trailing axes.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

ORTHO_TOL = 1e-9


def rot_x(angle: ArrayLike) -> NDArray:
    """Elementary rotation about the x axis."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(a), np.zeros_like(a)
    return np.stack(
        [np.stack([one, zero, zero], -1),
         np.stack([zero, c, -s], -1),
         np.stack([zero, s, c], -1)], -2)


def rot_y(angle: ArrayLike) -> NDArray:
    """Elementary rotation about the y axis."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(a), np.zeros_like(a)
    return np.stack(
        [np.stack([c, zero, s], -1),
         np.stack([zero, one, zero], -1),
         np.stack([-s, zero, c], -1)], -2)


def rot_z(angle: ArrayLike) -> NDArray:
    """Elementary rotation about the z axis."""
    a = np.asarray(angle, dtype=float)
    c, s = np.cos(a), np.sin(a)
    one, zero = np.ones_like(a), np.zeros_like(a)
    return np.stack(
        [np.stack([c, -s, zero], -1),
         np.stack([s, c, zero], -1),
         np.stack([zero, zero, one], -1)], -2)


def quat_to_matrix(q: ArrayLike) -> NDArray:
    """
    Convert unit quaternions (w, x, y, z) to rotation matrices.

    Parameters
    ----------
    q : array_like, shape (..., 4)
        Quaternions, scalar first. They are normalized before conversion.

    Returns
    -------
    R : ndarray, shape (..., 3, 3)
    """
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.stack(
        [np.stack([1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)], -1),
         np.stack([2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)], -1),
         np.stack([2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)], -1)], -2)


def matrix_to_quat(R: ArrayLike) -> NDArray:
    """
    Convert rotation matrices to unit quaternions (w, x, y, z) with w >= 0.

    Uses the largest-diagonal branch (Shepperd's method) for each matrix so
    the conversion stays accurate near 180 degree rotations.
    """
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    M = R.reshape(-1, 3, 3)
    q = np.empty((M.shape[0], 4))
    tr = np.trace(M, axis1=1, axis2=2)
    diag = np.diagonal(M, axis1=1, axis2=2)
    choice = np.argmax(np.column_stack([tr, diag]), axis=1)

    i = choice == 0
    s = np.sqrt(1.0 + tr[i]) * 2
    q[i, 0] = 0.25 * s
    q[i, 1] = (M[i, 2, 1] - M[i, 1, 2]) / s
    q[i, 2] = (M[i, 0, 2] - M[i, 2, 0]) / s
    q[i, 3] = (M[i, 1, 0] - M[i, 0, 1]) / s

    i = choice == 1
    s = np.sqrt(1.0 + M[i, 0, 0] - M[i, 1, 1] - M[i, 2, 2]) * 2
    q[i, 0] = (M[i, 2, 1] - M[i, 1, 2]) / s
    q[i, 1] = 0.25 * s
    q[i, 2] = (M[i, 0, 1] + M[i, 1, 0]) / s
    q[i, 3] = (M[i, 0, 2] + M[i, 2, 0]) / s

    i = choice == 2
    s = np.sqrt(1.0 + M[i, 1, 1] - M[i, 0, 0] - M[i, 2, 2]) * 2
    q[i, 0] = (M[i, 0, 2] - M[i, 2, 0]) / s
    q[i, 1] = (M[i, 0, 1] + M[i, 1, 0]) / s
    q[i, 2] = 0.25 * s
    q[i, 3] = (M[i, 1, 2] + M[i, 2, 1]) / s

    i = choice == 3
    s = np.sqrt(1.0 + M[i, 2, 2] - M[i, 0, 0] - M[i, 1, 1]) * 2
    q[i, 0] = (M[i, 1, 0] - M[i, 0, 1]) / s
    q[i, 1] = (M[i, 0, 2] + M[i, 2, 0]) / s
    q[i, 2] = (M[i, 1, 2] + M[i, 2, 1]) / s
    q[i, 3] = 0.25 * s

    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[q[:, 0] < 0] *= -1
    return q.reshape(batch + (4,))


def euler_yxz(R: ArrayLike) -> NDArray:
    """
    Intrinsic Y-X-Z angles (a, b, c) such that R = Ry(a) @ Rx(b) @ Rz(c).

    Returns an array with shape (..., 3).
    """
    R = np.asarray(R, dtype=float)
    b = np.arcsin(np.clip(-R[..., 1, 2], -1.0, 1.0))
    a = np.arctan2(R[..., 0, 2], R[..., 2, 2])
    c = np.arctan2(R[..., 1, 0], R[..., 1, 1])
    return np.stack([a, b, c], -1)


def is_rotation(R: ArrayLike, tol: float = ORTHO_TOL) -> bool:
    """True when R is orthonormal with determinant +1 within `tol`."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    eye = np.eye(3)
    ortho = np.abs(np.swapaxes(R, -1, -2) @ R - eye).max() <= tol
    return bool(ortho and np.abs(np.linalg.det(R) - 1.0).max() <= tol)


def orthonormalize(R: ArrayLike) -> NDArray:
    """Nearest rotation matrix (polar decomposition via SVD)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.ones(U.shape[:-1])
    D[..., -1] = np.sign(np.linalg.det(U @ Vt))
    return (U * D[..., None, :]) @ Vt
