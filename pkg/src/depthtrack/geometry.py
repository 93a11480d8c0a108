"""Rigid-frame and pinhole-camera geometry for depth-based tracking.

Conventions
-----------
Map frame: right-handed, z up.  Camera frame: z along the optical axis
(forward), x right, y down, so image u grows with camera x and v grows
with camera y.  A ``RigidTransform`` maps points from its source frame
to its destination frame as ``p_dst = R @ p_src + t``.

Covariances transform with the rotation only; the translation shifts the
mean, not the spread: ``S_dst = R @ S_src @ R.T``.

Pixel coordinates are continuous (u, v) with u along image columns and v
along rows; integer pixel (u, v) addresses ``data[v, u]`` in row-major
image arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Camera-frame depth below this counts as behind the sensor.
MIN_CAMERA_Z = 1e-6

_ORTHO_TOL = 1e-9


class BehindCamera(Exception):
    """Point (or predicted target) sits at or behind the image plane."""


class NonPositiveDepth(Exception):
    """Back-projection was asked for a depth that is not positive."""


def _checked_array(value, shape: tuple, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation taking points from one frame to another."""

    rotation: np.ndarray     # (3, 3), orthonormal, det +1
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        rot = _checked_array(self.rotation, (3, 3), "rotation")
        trans = _checked_array(self.translation, (3,), "translation")
        if np.abs(rot.T @ rot - np.eye(3)).max() > _ORTHO_TOL:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(rot) < 0.0:
            raise ValueError("rotation is a reflection, not a rotation")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, point) -> np.ndarray:
        """Transform a point: R @ p + t."""
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def rotate_cov(self, cov) -> np.ndarray:
        """Transform a covariance; the translation drops out."""
        out = self.rotation @ np.asarray(cov, dtype=float) @ self.rotation.T
        return 0.5 * (out + out.T)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: compose(a, b).apply(p) == a.apply(b.apply(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> RigidTransform:
    """Camera-to-map pose for a camera at ``eye`` aimed at ``target``.

    The optical axis (camera z) points from eye toward target.  Camera x
    is chosen perpendicular to ``up`` so the image u axis stays level,
    and camera y completes the right-handed frame (v grows downward).
    When the axis is parallel to ``up`` (straight up/down views), map y
    serves as the fallback reference so the result stays deterministic.
    """
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    dist = np.linalg.norm(fwd)
    if dist < 1e-12:
        raise ValueError("look_at: eye and target coincide")
    z_axis = fwd / dist
    x_axis = np.cross(z_axis, np.asarray(up, dtype=float))
    if np.linalg.norm(x_axis) < 1e-9:
        x_axis = np.cross(z_axis, np.array([0.0, 1.0, 0.0]))
    x_axis = x_axis / np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    return RigidTransform(np.column_stack([x_axis, y_axis, z_axis]), eye)


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole intrinsics plus the camera-to-map extrinsic pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    cam_to_map: RigidTransform

    def __post_init__(self):
        if not (self.fx > 0.0 and self.fy > 0.0):
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1 px")
        if not (0.0 <= self.cx < self.width and 0.0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @cached_property
    def map_to_cam(self) -> RigidTransform:
        return self.cam_to_map.inverse()

    def project(self, p_cam) -> np.ndarray:
        """Camera-frame point to continuous pixel (u, v)."""
        p = np.asarray(p_cam, dtype=float)
        if p[2] <= MIN_CAMERA_Z:
            raise BehindCamera(f"camera-frame z = {p[2]:.3g} is not in front of the sensor")
        return np.array([
            self.fx * p[0] / p[2] + self.cx,
            self.fy * p[1] / p[2] + self.cy,
        ])

    def back_project(self, pixel, depth: float) -> np.ndarray:
        """Pixel plus z-depth to a camera-frame point."""
        if depth <= 0.0:
            raise NonPositiveDepth(f"depth = {depth:.3g} must be positive")
        u, v = float(pixel[0]), float(pixel[1])
        return np.array([
            depth * (u - self.cx) / self.fx,
            depth * (v - self.cy) / self.fy,
            depth,
        ])

    def projection_jacobian(self, p_cam) -> np.ndarray:
        """d(u, v)/d(x, y, z) of project() at a camera-frame point."""
        p = np.asarray(p_cam, dtype=float)
        if p[2] <= MIN_CAMERA_Z:
            raise BehindCamera(f"camera-frame z = {p[2]:.3g} is not in front of the sensor")
        inv_z = 1.0 / p[2]
        return np.array([
            [self.fx * inv_z, 0.0, -self.fx * p[0] * inv_z * inv_z],
            [0.0, self.fy * inv_z, -self.fy * p[1] * inv_z * inv_z],
        ])

    def project_cov(self, p_cam, cov_cam) -> np.ndarray:
        """First-order pixel covariance of a camera-frame position covariance."""
        jac = self.projection_jacobian(p_cam)
        out = jac @ np.asarray(cov_cam, dtype=float) @ jac.T
        return 0.5 * (out + out.T)


def eigh2x2(sym) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form eigendecomposition of a symmetric 2x2 matrix.

    Returns ``(w, v)`` with eigenvalues ``w[0] >= w[1]`` and unit
    eigenvectors in the columns of ``v``.  Input within 1e-12 of a scaled
    identity comes back axis-aligned, and each vector's sign is fixed so
    its largest-magnitude component is positive; both rules keep
    downstream consumers deterministic under tiny perturbations.
    """
    mat = np.asarray(sym, dtype=float)
    a, b, c = float(mat[0, 0]), float(mat[0, 1]), float(mat[1, 1])
    if abs(a - c) < 1e-12 and abs(b) < 1e-12:
        lam = 0.5 * (a + c)
        return np.array([lam, lam]), np.eye(2)
    mid = 0.5 * (a + c)
    disc = math.hypot(0.5 * (a - c), b)
    w = np.array([mid + disc, mid - disc])
    # (S - w[0] I) has rank one; of its two null-space candidates keep the
    # better-conditioned one.
    cand_a = np.array([b, w[0] - a])
    cand_b = np.array([w[0] - c, b])
    e_major = cand_a if cand_a @ cand_a >= cand_b @ cand_b else cand_b
    e_major = e_major / np.linalg.norm(e_major)
    e_minor = np.array([-e_major[1], e_major[0]])
    return w, np.column_stack([_canonical_sign(e_major), _canonical_sign(e_minor)])


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    lead = int(np.argmax(np.abs(vec)))
    return -vec if vec[lead] < 0.0 else vec
