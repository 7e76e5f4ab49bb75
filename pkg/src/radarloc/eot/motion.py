"""Constant turn rate and acceleration (CTRA) vehicle kinematics.

State vector: [x, y, v, a, phi, phi_dot] with phi the heading. The
closed-form CTRA integral propagates the mean; covariance goes through
the unscented transform with additive process noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError
from .unscented import sigma_points, symmetrize

STATE_DIM = 6
# |phi_dot| below this uses a second-order series in phi_dot: the exact
# turning formula divides by phi_dot^2 and loses ~a*eps/phi_dot^2 to
# cancellation, which exceeds 1e-6 already near phi_dot ~ 1e-5
_STRAIGHT_EPS = 1e-3

DEFAULT_PROCESS_NOISE_DIAG = (0.1 ** 2, 0.1 ** 2, 0.3 ** 2, 0.2 ** 2, 0.1 ** 2, 0.1 ** 2)


@dataclass(frozen=True)
class KinematicState:
    """CTRA state estimate with covariance."""

    vector: np.ndarray      # (6,)
    covariance: np.ndarray  # (6, 6)

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64).reshape(STATE_DIM)
        cov = np.asarray(self.covariance, dtype=np.float64).reshape(STATE_DIM, STATE_DIM)
        if not np.allclose(cov, cov.T, atol=1e-9):
            raise InvalidParameterError("kinematic covariance must be symmetric")
        vec.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "covariance", cov)

    @property
    def x(self) -> float:
        return float(self.vector[0])

    @property
    def y(self) -> float:
        return float(self.vector[1])

    @property
    def v(self) -> float:
        return float(self.vector[2])

    @property
    def a(self) -> float:
        return float(self.vector[3])

    @property
    def phi(self) -> float:
        return float(self.vector[4])

    @property
    def phi_dot(self) -> float:
        return float(self.vector[5])

    @property
    def center(self) -> np.ndarray:
        return self.vector[:2]


def ctra_transition(states: np.ndarray, dt: float) -> np.ndarray:
    """Closed-form CTRA propagation of one state or a batch of states."""
    arr = np.asarray(states, dtype=np.float64)
    single = arr.ndim == 1
    states = np.atleast_2d(arr)
    x, y, v, a, phi, w = states.T
    out = states.copy()
    vf = v + a * dt
    phif = phi + w * dt
    turning = np.abs(w) >= _STRAIGHT_EPS
    # near-straight: series of int (v + a t) cos/sin(phi + w t) dt in w
    arc = v * dt + 0.5 * a * dt * dt
    c1 = 0.5 * v * dt ** 2 + a * dt ** 3 / 3.0
    c2 = v * dt ** 3 / 3.0 + 0.25 * a * dt ** 4
    dx = arc * np.cos(phi) - w * np.sin(phi) * c1 \
        - 0.5 * w ** 2 * np.cos(phi) * c2
    dy = arc * np.sin(phi) + w * np.cos(phi) * c1 \
        - 0.5 * w ** 2 * np.sin(phi) * c2
    if np.any(turning):
        wt = np.where(turning, w, 1.0)  # placeholder off-branch, masked below
        dx_t = (vf * np.sin(phif) - v * np.sin(phi)) / wt \
            + a * (np.cos(phif) - np.cos(phi)) / wt ** 2
        dy_t = (-vf * np.cos(phif) + v * np.cos(phi)) / wt \
            + a * (np.sin(phif) - np.sin(phi)) / wt ** 2
        dx = np.where(turning, dx_t, dx)
        dy = np.where(turning, dy_t, dy)
    out[:, 0] = x + dx
    out[:, 1] = y + dy
    out[:, 2] = vf
    out[:, 4] = phif
    return out[0] if single else out


def default_process_noise(dt: float,
                          diag_per_second=DEFAULT_PROCESS_NOISE_DIAG) -> np.ndarray:
    return dt * np.diag(diag_per_second)


def ctra_predict(state: KinematicState, dt: float,
                 process_noise: np.ndarray | None = None) -> KinematicState:
    """Propagate mean and covariance over dt with additive process noise."""
    if dt <= 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if process_noise is None:
        process_noise = default_process_noise(dt)
    pts, wm, wc = sigma_points(state.vector, state.covariance)
    wm = wm.astype(np.float64)
    wc = wc.astype(np.float64)
    prop = ctra_transition(pts, dt)
    mean = wm @ prop
    diff = prop - mean
    cov = (wc[:, None] * diff).T @ diff + np.asarray(process_noise, dtype=np.float64)
    return KinematicState(mean, symmetrize(cov))
