"""Synthetic depth scenes: a spherical target over an empty background.

Rendering is ray-sphere intersection per pixel, storing z-depth of the
front surface (what a depth camera reports), with multiplicative
Gaussian noise and a dropout fraction of lost returns.  All randomness
is counter-based: every draw is a pure hash of (seed, frame, stream,
pixel), so a pixel's noise never depends on evaluation order or on how
many other pixels were rendered, and rollouts are bit-reproducible.

The detector is not a vision model; it is an error model.  It sees the
geometric target silhouette and returns its padded, jittered bounding
box, or nothing during Bernoulli misses and deterministic burst-outage
windows (the first window starts at t = burst_period).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import MIN_CAMERA_Z, CameraModel
from .kalman import FilterConfig
from .localize import BoundingBox, DepthImage
from .reacquire import SearchConfig

_MASK64 = (1 << 64) - 1
_GOLDEN_INT = 0x9E3779B97F4A7C15
_MIX1_INT = 0xBF58476D1CE4E5B9
_MIX2_INT = 0x94D049BB133111EB
_GOLDEN = np.uint64(_GOLDEN_INT)
_MIX1 = np.uint64(_MIX1_INT)
_MIX2 = np.uint64(_MIX2_INT)
_INV53 = 1.0 / (1 << 53)

# Independent draw streams per (seed, frame).
_STREAM_DEPTH_NOISE = 1
_STREAM_DROPOUT = 2
_STREAM_DETECT = 3
_STREAM_JITTER_U = 4
_STREAM_JITTER_V = 5


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix64_int(z: int) -> int:
    """Same finalizer as _mix64 in plain ints; cheap for one-off draws."""
    z = ((z ^ (z >> 30)) * _MIX1_INT) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2_INT) & _MASK64
    return z ^ (z >> 31)


def _hash64(seed: int, frame: int, stream: int, pixel=None) -> np.ndarray:
    with np.errstate(over="ignore"):                 # uint64 wrap is the point
        h = np.asarray(np.uint64(seed & _MASK64))
        for part in (np.uint64(frame), np.uint64(stream)):
            h = _mix64(h + _GOLDEN + part)
        if pixel is not None:
            h = _mix64(h + _GOLDEN + np.asarray(pixel, dtype=np.uint64))
    return h


def _hash64_int(seed: int, frame: int, stream: int) -> int:
    """Bit-identical to _hash64 without a pixel term, avoiding array overhead."""
    h = seed & _MASK64
    for part in (frame, stream):
        h = _mix64_int((h + _GOLDEN_INT + part) & _MASK64)
    return h


def _u01(seed: int, frame: int, stream: int, pixel=None):
    """Uniform [0, 1) draws, one per pixel (or a scalar without pixels)."""
    if pixel is None:
        return (_hash64_int(seed, frame, stream) >> 11) * _INV53
    return (_hash64(seed, frame, stream, pixel) >> np.uint64(11)).astype(np.float64) * _INV53


def _normal(seed: int, frame: int, stream: int, pixel=None) -> np.ndarray:
    """Standard normal draws via Box-Muller on two derived uniforms."""
    h1 = _hash64(seed, frame, stream, pixel)
    with np.errstate(over="ignore"):
        h2 = _mix64(h1 + _GOLDEN)
    u1 = (h1 >> np.uint64(11)).astype(np.float64) * _INV53
    u2 = (h2 >> np.uint64(11)).astype(np.float64) * _INV53
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


class TrajectoryKind(Enum):
    STATIC_HOVER = "static"
    CIRCLE = "circle"
    FIGURE_EIGHT = "fig8"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Target flight path; the motion plane sits at z = center[2]."""

    kind: TrajectoryKind
    center: np.ndarray   # (3,) map frame; z is the flight altitude
    radius: float = 0.0  # m, path scale (unused for STATIC_HOVER)
    speed: float = 0.0   # m/s, path rate (unused for STATIC_HOVER)

    def __post_init__(self):
        center = np.array(self.center, dtype=float)
        if center.shape != (3,) or not np.isfinite(center).all():
            raise ValueError("center must be a finite 3-vector")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if self.kind is not TrajectoryKind.STATIC_HOVER:
            if self.radius <= 0.0 or self.speed <= 0.0:
                raise ValueError(f"{self.kind.value}: radius and speed must be positive")

    @property
    def altitude(self) -> float:
        return float(self.center[2])


def truth_state(traj: Trajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact target position and velocity at time t >= 0."""
    if t < 0.0:
        raise ValueError("t must be non-negative")
    if traj.kind is TrajectoryKind.STATIC_HOVER:
        return traj.center.copy(), np.zeros(3)
    omega = traj.speed / traj.radius
    ang = omega * t
    if traj.kind is TrajectoryKind.CIRCLE:
        pos = traj.center + traj.radius * np.array([math.cos(ang), math.sin(ang), 0.0])
        vel = traj.radius * omega * np.array([-math.sin(ang), math.cos(ang), 0.0])
        return pos, vel
    # Figure eight: a 1:2 Lissajous, half amplitude on the fast axis.
    pos = traj.center + traj.radius * np.array(
        [math.sin(ang), 0.5 * math.sin(2.0 * ang), 0.0])
    vel = traj.radius * omega * np.array(
        [math.cos(ang), math.cos(2.0 * ang), 0.0])
    return pos, vel


@dataclass(frozen=True)
class SensorNoise:
    depth_sigma_rel: float = 0.01   # sigma = depth_sigma_rel * depth, per pixel
    pixel_dropout: float = 0.0      # fraction of returns lost

    def __post_init__(self):
        if self.depth_sigma_rel < 0.0:
            raise ValueError("depth_sigma_rel must be non-negative")
        if not 0.0 <= self.pixel_dropout < 1.0:
            raise ValueError("pixel_dropout must be in [0, 1)")


@dataclass(frozen=True)
class DetectorModel:
    detect_prob: float = 1.0    # per-frame Bernoulli success
    burst_period: float = 0.0   # s between outage windows; 0 disables them
    burst_duration: float = 0.0 # s each outage lasts
    bbox_pad_px: int = 2        # padding around the tight silhouette box
    bbox_jitter_px: int = 1     # uniform integer box shift, +/- this many px

    def __post_init__(self):
        if not 0.0 <= self.detect_prob <= 1.0:
            raise ValueError("detect_prob must be in [0, 1]")
        if self.burst_period < 0.0 or self.burst_duration < 0.0:
            raise ValueError("burst window times must be non-negative")
        if self.burst_period > 0.0 and self.burst_duration >= self.burst_period:
            raise ValueError("burst_duration must be shorter than burst_period")
        if self.bbox_pad_px < 0 or self.bbox_jitter_px < 0:
            raise ValueError("box pad and jitter must be non-negative")


def in_burst_outage(det: DetectorModel, t: float) -> bool:
    """True inside a deterministic outage window [k*period, k*period + duration), k >= 1."""
    if det.burst_period <= 0.0 or det.burst_duration <= 0.0 or t < det.burst_period:
        return False
    return (t % det.burst_period) < det.burst_duration


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything one benchmark run needs; see scenario.py for the file schema."""

    name: str
    trajectory: Trajectory
    noise: SensorNoise
    detector: DetectorModel
    camera: CameraModel
    filter: FilterConfig
    search: SearchConfig
    target_radius: float     # m
    duration: float          # s
    frame_rate: float        # Hz, camera frames
    predict_rate: float      # Hz, filter prediction sub-steps
    seed: int
    backplane_depth: float = 0.0  # m; 0 disables the flat background wall
    settle_time: float = 5.0      # s excluded from error metrics

    def __post_init__(self):
        if self.target_radius <= 0.0:
            raise ValueError("target_radius must be positive")
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.frame_rate <= 0.0 or self.predict_rate <= 0.0:
            raise ValueError("rates must be positive")
        if self.frame_rate > self.predict_rate:
            raise ValueError("predict_rate must be at least frame_rate")
        if self.backplane_depth < 0.0:
            raise ValueError("backplane_depth must be non-negative")
        if self.settle_time < 0.0:
            raise ValueError("settle_time must be non-negative")


_CUBE_OFFSETS = np.array([[sx, sy, sz] for sx in (-1.0, 1.0)
                          for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)])

# Render and detect want the same patch each frame; remember the last one.
# Keyed on the camera object itself (held alive here) plus pose bytes.
_PATCH_MEMO: list = [None, None]


def _sphere_patch(cam: CameraModel, center_cam: np.ndarray, radius: float):
    """Ray-cast the sphere over a conservative pixel window.

    Returns (u0, v0, zdepth, hit) where zdepth/hit are (rows, cols)
    arrays anchored at pixel (u0, v0), or None when nothing can be
    visible: target behind the sensor, camera inside the sphere, or a
    window that misses the image.
    """
    key = (cam, center_cam.tobytes(), radius)
    if _PATCH_MEMO[0] == key:
        return _PATCH_MEMO[1]
    result = _sphere_patch_compute(cam, center_cam, radius)
    _PATCH_MEMO[0] = key
    _PATCH_MEMO[1] = result
    return result


def _sphere_patch_compute(cam: CameraModel, center_cam: np.ndarray, radius: float):
    cz = center_cam[2]
    norm_sq = float(center_cam @ center_cam)
    if cz <= MIN_CAMERA_Z or norm_sq <= radius * radius:
        return None
    # The sphere sits inside its bounding cube; with the whole cube in
    # front of the camera, the projected corners bound the silhouette.
    corners = center_cam + radius * _CUBE_OFFSETS
    if corners[:, 2].min() <= MIN_CAMERA_Z:
        u_lo, u_hi, v_lo, v_hi = 0, cam.width - 1, 0, cam.height - 1
    else:
        us = cam.fx * corners[:, 0] / corners[:, 2] + cam.cx
        vs = cam.fy * corners[:, 1] / corners[:, 2] + cam.cy
        u_lo = max(0, math.floor(us.min()) - 1)
        u_hi = min(cam.width - 1, math.ceil(us.max()) + 1)
        v_lo = max(0, math.floor(vs.min()) - 1)
        v_hi = min(cam.height - 1, math.ceil(vs.max()) + 1)
    if u_lo > u_hi or v_lo > v_hi:
        return None
    dx = (np.arange(u_lo, u_hi + 1, dtype=np.float64) - cam.cx) / cam.fx
    dy = ((np.arange(v_lo, v_hi + 1, dtype=np.float64) - cam.cy) / cam.fy)[:, None]
    # Ray p = t * (dx, dy, 1); with unit z the parameter t is the z-depth.
    a = dx * dx + dy * dy + 1.0
    b = -2.0 * (dx * center_cam[0] + dy * center_cam[1] + cz)
    disc = b * b - 4.0 * a * (norm_sq - radius * radius)
    hit = disc >= 0.0
    zdepth = np.zeros_like(a)
    if hit.any():
        t_front = (-b[hit] - np.sqrt(disc[hit])) / (2.0 * a[hit])
        ok = t_front > MIN_CAMERA_Z
        zdepth[hit] = np.where(ok, t_front, 0.0)
        hit[hit] = ok
    if not hit.any():
        return None
    return u_lo, v_lo, zdepth, hit


def render_depth(cfg: ScenarioConfig, target_pos: np.ndarray, t: float,
                 frame_idx: int) -> DepthImage:
    """One noisy depth frame of the target (and optional backplane) at time t."""
    cam = cfg.camera
    canvas = np.zeros((cam.height, cam.width), dtype=np.float32)
    patch = _sphere_patch(cam, cam.map_to_cam.apply(target_pos), cfg.target_radius)
    if cfg.backplane_depth > 0.0:
        canvas[:] = cfg.backplane_depth
    region, v_off, u_off = None, 0, 0
    if patch is not None:
        u0, v0, zdepth, hit = patch
        window = canvas[v0:v0 + zdepth.shape[0], u0:u0 + zdepth.shape[1]]
        if cfg.backplane_depth > 0.0:
            nearer = hit & (zdepth < window)
            window[nearer] = zdepth[nearer]
        else:
            window[hit] = zdepth[hit]
            region, v_off, u_off = window, v0, u0
    if cfg.backplane_depth > 0.0:
        region = canvas
    # Returns exist only inside `region`, so the noise pass skips the
    # rest of the canvas.  Noise keys on absolute pixel index, making
    # the output independent of how the scan was windowed.
    if region is not None and (cfg.noise.depth_sigma_rel > 0.0
                               or cfg.noise.pixel_dropout > 0.0):
        vs, us = np.nonzero(region > 0.0)
        if us.size:
            lin = (vs + v_off) * cam.width + (us + u_off)
            depths = region[vs, us]
            if cfg.noise.depth_sigma_rel > 0.0:
                depths = depths * (1.0 + cfg.noise.depth_sigma_rel
                                   * _normal(cfg.seed, frame_idx, _STREAM_DEPTH_NOISE, lin))
            keep = depths > 0.0
            if cfg.noise.pixel_dropout > 0.0:
                keep &= _u01(cfg.seed, frame_idx, _STREAM_DROPOUT, lin) \
                    >= cfg.noise.pixel_dropout
            region[vs, us] = np.where(keep, depths, 0.0)
    return DepthImage(data=canvas, stamp=t)


def detect(cfg: ScenarioConfig, target_pos: np.ndarray, t: float,
           frame_idx: int) -> BoundingBox | None:
    """Detector error model: the silhouette's padded, jittered box, or None.

    The box comes from the noiseless geometric silhouette, not the
    rendered pixels, so no depth image is needed.  None during burst
    outage windows, on Bernoulli misses, and whenever the target paints
    no pixel.  Draws are counter-based, so outcomes do not depend on
    call order.
    """
    det = cfg.detector
    cam = cfg.camera
    if in_burst_outage(det, t):
        return None
    patch = _sphere_patch(cam, cam.map_to_cam.apply(target_pos), cfg.target_radius)
    if patch is None:
        return None
    if _u01(cfg.seed, frame_idx, _STREAM_DETECT) >= det.detect_prob:
        return None
    u0, v0, _, hit = patch
    vs, us = np.nonzero(hit)
    jitter_u = jitter_v = 0
    if det.bbox_jitter_px > 0:
        span = 2 * det.bbox_jitter_px + 1
        jitter_u = math.floor(_u01(cfg.seed, frame_idx, _STREAM_JITTER_U) * span) \
            - det.bbox_jitter_px
        jitter_v = math.floor(_u01(cfg.seed, frame_idx, _STREAM_JITTER_V) * span) \
            - det.bbox_jitter_px
    u_min = u0 + int(us.min()) - det.bbox_pad_px + jitter_u
    u_max = u0 + int(us.max()) + det.bbox_pad_px + jitter_u
    v_min = v0 + int(vs.min()) - det.bbox_pad_px + jitter_v
    v_max = v0 + int(vs.max()) + det.bbox_pad_px + jitter_v
    u_min, u_max = max(0, u_min), min(cam.width - 1, u_max)
    v_min, v_max = max(0, v_min), min(cam.height - 1, v_max)
    if u_min > u_max or v_min > v_max:
        return None
    return BoundingBox(u_min, v_min, u_max, v_max)
