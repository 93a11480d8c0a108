"""Constant-velocity Kalman filter over [px, py, pz, vx, vy, vz].

Position is measured directly (the measurement matrix selects the first
three state entries), velocity is inferred.  Process noise follows the
white-noise-acceleration model, so each axis gets the classic
[[dt^3/3, dt^2/2], [dt^2/2, dt]] block scaled by ``q_scale``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

STATE_DIM = 6

# Innovation covariance condition number above this is treated as singular.
MAX_INNOVATION_COND = 1e12


class NonPositiveDt(Exception):
    """Prediction was asked to advance by a non-positive time step."""


class SingularInnovation(Exception):
    """Innovation covariance is numerically singular; update refused."""


class MeasurementSource(Enum):
    PRIMARY_DETECTOR = "primary"
    KF_GUIDED = "kf_guided"


@dataclass(frozen=True, eq=False)
class PositionMeasurement:
    """A 3D map-frame position fix with its acquisition route."""

    position: np.ndarray  # (3,) map frame, meters
    stamp: float          # seconds
    source: MeasurementSource

    def __post_init__(self):
        pos = np.array(self.position, dtype=float)
        if pos.shape != (3,) or not np.isfinite(pos).all():
            raise ValueError("position must be a finite 3-vector")
        pos.setflags(write=False)
        object.__setattr__(self, "position", pos)


@dataclass(frozen=True, eq=False)
class StateEstimate:
    """Filter state at a time stamp.  Arrays are adopted, not copied;
    treat them as immutable once handed over.  Constructed on every
    predict step, so validation stays at shape checks."""

    mean: np.ndarray   # (6,)
    cov: np.ndarray    # (6, 6), symmetric
    stamp: float       # seconds

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.shape != (STATE_DIM,):
            raise ValueError("mean must be a 6-vector")
        if cov.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("cov must be a 6x6 matrix")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def position(self) -> np.ndarray:
        return self.mean[:3]

    @property
    def velocity(self) -> np.ndarray:
        return self.mean[3:]


@dataclass(frozen=True)
class FilterConfig:
    """Tuning knobs; defaults suit a small multirotor maneuvering at a few m/s^2."""

    q_scale: float = 25.0                              # accel noise density, m^2/s^3
    r_diag: tuple = (1.6e-3, 1.6e-3, 1.6e-3)           # measurement variances, m^2
    p0_pos: float = 1.0                                # initial position variance, m^2
    p0_vel: float = 25.0                               # initial velocity variance, m^2/s^2
    stale_timeout: float = 1.0                         # s without a fix before the track is stale

    def __post_init__(self):
        if self.q_scale < 0.0:
            raise ValueError("q_scale must be non-negative")
        if len(self.r_diag) != 3 or any(r <= 0.0 for r in self.r_diag):
            raise ValueError("r_diag needs three positive variances")
        if self.p0_pos <= 0.0 or self.p0_vel <= 0.0:
            raise ValueError("initial variances must be positive")
        if self.stale_timeout <= 0.0:
            raise ValueError("stale_timeout must be positive")


def make_transition(dt: float) -> np.ndarray:
    """Constant-velocity transition: position += velocity * dt."""
    if dt <= 0.0:
        raise NonPositiveDt(f"dt = {dt:.3g} must be positive")
    f = np.eye(STATE_DIM)
    f[0, 3] = f[1, 4] = f[2, 5] = dt
    return f


def make_process_noise(dt: float, q_scale: float) -> np.ndarray:
    """White-noise-acceleration covariance for one step of length dt."""
    if dt <= 0.0:
        raise NonPositiveDt(f"dt = {dt:.3g} must be positive")
    if q_scale < 0.0:
        raise ValueError("q_scale must be non-negative")
    qpp = q_scale * dt ** 3 / 3.0
    qpv = q_scale * dt ** 2 / 2.0
    qvv = q_scale * dt
    q = np.zeros((STATE_DIM, STATE_DIM))
    for axis in range(3):
        q[axis, axis] = qpp
        q[axis, axis + 3] = q[axis + 3, axis] = qpv
        q[axis + 3, axis + 3] = qvv
    return q


def initialize(meas: PositionMeasurement, cfg: FilterConfig) -> StateEstimate:
    """Start a track at a position fix with zero velocity and diagonal cov."""
    mean = np.zeros(STATE_DIM)
    mean[:3] = meas.position
    cov = np.diag([cfg.p0_pos] * 3 + [cfg.p0_vel] * 3)
    return StateEstimate(mean, cov, meas.stamp)


def predict(state: StateEstimate, dt: float, cfg: FilterConfig) -> StateEstimate:
    """Advance the state by dt under the constant-velocity model."""
    return predict_with(state, make_transition(dt), make_process_noise(dt, cfg.q_scale), dt)


def predict_with(state: StateEstimate, f: np.ndarray, q: np.ndarray, dt: float) -> StateEstimate:
    """predict() with caller-cached transition and process-noise matrices.

    The benchmark loop runs prediction at ~100 Hz with a fixed dt, where
    rebuilding F and Q every step is measurable overhead.
    """
    if dt <= 0.0:
        raise NonPositiveDt(f"dt = {dt:.3g} must be positive")
    mean = f @ state.mean
    cov = f @ state.cov @ f.T + q
    cov = 0.5 * (cov + cov.T)
    return StateEstimate(mean, cov, state.stamp + dt)


def update(state: StateEstimate, meas: PositionMeasurement, cfg: FilterConfig) -> StateEstimate:
    """Fuse a position fix into the state.

    The measurement matrix selects position, so the innovation covariance
    is the position covariance block plus R and the gain solve works on
    3x3 systems.  The posterior covariance uses the plain (I - K H) P
    form, explicitly symmetrized.
    """
    p = state.cov
    innov_cov = p[:3, :3] + np.diag(cfg.r_diag)
    eigs = np.linalg.eigvalsh(innov_cov)
    if eigs[0] <= 0.0 or eigs[-1] > MAX_INNOVATION_COND * eigs[0]:
        raise SingularInnovation(
            f"innovation covariance condition {eigs[-1]:.3g}/{eigs[0]:.3g} is not invertible")
    gain = np.linalg.solve(innov_cov, p[:3, :]).T       # K = P H^T S^-1, (6, 3)
    mean = state.mean + gain @ (meas.position - state.mean[:3])
    cov = p - gain @ p[:3, :]                           # (I - K H) P
    cov = 0.5 * (cov + cov.T)
    return StateEstimate(mean, cov, state.stamp)
