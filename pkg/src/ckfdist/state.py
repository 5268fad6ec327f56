"""Filter state vector layout and container."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

N_STATE = 18

# x = [p_mp, p_la, p_ra, v_mp, v_la, v_ra]
POS = {"mid_pelvis": slice(0, 3), "left": slice(3, 6), "right": slice(6, 9)}
VEL = {"mid_pelvis": slice(9, 12), "left": slice(12, 15), "right": slice(15, 18)}


@dataclass
class FilterState:
    """
    Position/velocity state of mid-pelvis and both ankles with its covariance.

    Parameters
    ----------
    x : ndarray, shape (18,)
        ``[p_mp, p_la, p_ra, v_mp, v_la, v_ra]`` in m and m/s, world frame.
    P : ndarray, shape (18, 18)
        Error covariance.
    """

    x: NDArray
    P: NDArray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(N_STATE)
        self.P = np.asarray(self.P, dtype=float).reshape(N_STATE, N_STATE)

    @classmethod
    def from_positions(cls, mid_pelvis: ArrayLike, left_ankle: ArrayLike, right_ankle: ArrayLike,
                       pos_var: float = 1e-4, vel_var: float = 1e-2) -> FilterState:
        """State at rest at the given positions with a diagonal covariance."""
        x = np.zeros(N_STATE)
        x[POS["mid_pelvis"]] = mid_pelvis
        x[POS["left"]] = left_ankle
        x[POS["right"]] = right_ankle
        P = np.diag(np.r_[np.full(9, pos_var), np.full(9, vel_var)])
        return cls(x, P)

    @property
    def mid_pelvis(self) -> NDArray:
        return self.x[POS["mid_pelvis"]]

    @property
    def left_ankle(self) -> NDArray:
        return self.x[POS["left"]]

    @property
    def right_ankle(self) -> NDArray:
        return self.x[POS["right"]]

    def ankle(self, side: str) -> NDArray:
        return self.x[POS[side]]

    def ankle_velocity(self, side: str) -> NDArray:
        return self.x[VEL[side]]

    def copy(self) -> FilterState:
        return FilterState(self.x.copy(), self.P.copy())

    def is_valid(self, tol: float = 1e-9) -> bool:
        """Finite state, symmetric covariance with no eigenvalue below -tol."""
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.P))):
            return False
        if np.abs(self.P - self.P.T).max() > tol:
            return False
        return bool(np.linalg.eigvalsh(0.5 * (self.P + self.P.T)).min() >= -tol)
