"""Filter-guided measurement reacquisition in the depth image.

When the primary detector misses a frame, the predicted track state is
projected into the image: the map-frame position covariance is rotated
into the camera frame and pushed through the projection Jacobian to a
2x2 pixel covariance whose scaled eigen-ellipse bounds where the target
can plausibly appear.  Pixels inside the ellipse are gated around the
predicted depth (3 sigma, floored), gated pixels are grouped into
8-connected blobs, and the blob nearest the predicted center is
localized just like a primary detection, yielding a KF-guided fix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import CameraModel, eigh2x2
from .kalman import MeasurementSource, PositionMeasurement, StateEstimate
from .localize import DepthImage

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class OffImage(Exception):
    """Search ellipse covers no usable image pixels."""


class NoContour(Exception):
    """No depth blob survived gating inside the search ellipse."""


@dataclass(frozen=True)
class SearchConfig:
    """Shape and gating knobs for the search ellipse."""

    alpha_roi: float = 5.0       # half-axis scale on sqrt(eigenvalue), unitless
    min_axis_px: float = 4.0     # half-axis floor
    max_axis_frac: float = 0.5   # half-axis cap as a fraction of min(width, height)
    sigma_z_floor: float = 0.05  # m, floor on the depth-gate sigma
    min_blob_px: int = 3         # blobs smaller than this are noise
    require_inside: bool = False # True: reject ellipses that poke past the image edge

    def __post_init__(self):
        if self.alpha_roi <= 0.0:
            raise ValueError("alpha_roi must be positive")
        if self.min_axis_px <= 0.0:
            raise ValueError("min_axis_px must be positive")
        if not 0.0 < self.max_axis_frac <= 1.0:
            raise ValueError("max_axis_frac must be in (0, 1]")
        if self.sigma_z_floor < 0.0:
            raise ValueError("sigma_z_floor must be non-negative")
        if self.min_blob_px < 1:
            raise ValueError("min_blob_px must be at least 1")


@dataclass(frozen=True, eq=False)
class SearchEllipse:
    """Pixel-space search region with its depth gate parameters."""

    center: np.ndarray     # (2,) px
    half_axes: np.ndarray  # (2,) px, major first
    axes: np.ndarray       # (2, 2) unit eigenvector columns, major first
    depth_pred: float      # m, predicted camera-frame z of the target
    sigma_z: float         # m, 1-sigma depth spread of the prediction


@dataclass(frozen=True, eq=False)
class ContourCandidate:
    """One 8-connected blob of gated pixels."""

    pixels: np.ndarray   # (n, 2) int (u, v)
    centroid: np.ndarray # (2,) float px
    mean_depth: float    # m

    @property
    def count(self) -> int:
        return self.pixels.shape[0]


def build_search_ellipse(state: StateEstimate, cam: CameraModel,
                         cfg: SearchConfig) -> SearchEllipse:
    """Project the track's position belief into the image as an ellipse.

    Half axes are alpha_roi * sqrt(eigenvalue), clamped to
    [min_axis_px, max_axis_frac * min(width, height)].  Raises
    BehindCamera when the predicted target is not in front of the
    sensor, and OffImage when the ellipse covers no pixels (or, with
    require_inside, when it is not entirely inside the image).
    """
    to_cam = cam.map_to_cam
    p_cam = to_cam.apply(state.mean[:3])
    cov_cam = to_cam.rotate_cov(state.cov[:3, :3])
    center = cam.project(p_cam)
    eigvals, eigvecs = eigh2x2(cam.project_cov(p_cam, cov_cam))
    axis_cap = cfg.max_axis_frac * min(cam.width, cam.height)
    half_axes = np.clip(cfg.alpha_roi * np.sqrt(np.maximum(eigvals, 0.0)),
                        cfg.min_axis_px, axis_cap)
    ellipse = SearchEllipse(
        center=center,
        half_axes=half_axes,
        axes=eigvecs,
        depth_pred=float(p_cam[2]),
        sigma_z=math.sqrt(max(float(cov_cam[2, 2]), 0.0)),
    )
    if cfg.require_inside:
        ext_u, ext_v = _pixel_extents(ellipse)
        if (center[0] - ext_u < 0.0 or center[0] + ext_u > cam.width - 1
                or center[1] - ext_v < 0.0 or center[1] + ext_v > cam.height - 1):
            raise OffImage("search ellipse pokes past the image edge")
    elif _clipped_bbox(ellipse, cam.width, cam.height) is None:
        raise OffImage("search ellipse covers no image pixels")
    return ellipse


def _pixel_extents(e: SearchEllipse) -> tuple[float, float]:
    """Axis-aligned (u, v) half extents of the rotated ellipse."""
    scaled = e.axes * e.half_axes          # columns scaled by their half axis
    return (math.hypot(scaled[0, 0], scaled[0, 1]),
            math.hypot(scaled[1, 0], scaled[1, 1]))


def _clipped_bbox(e: SearchEllipse, width: int, height: int):
    """Integer pixel bbox of the ellipse clipped to the image, or None."""
    ext_u, ext_v = _pixel_extents(e)
    u_lo = max(0, math.ceil(e.center[0] - ext_u))
    u_hi = min(width - 1, math.floor(e.center[0] + ext_u))
    v_lo = max(0, math.ceil(e.center[1] - ext_v))
    v_hi = min(height - 1, math.floor(e.center[1] + ext_v))
    if u_lo > u_hi or v_lo > v_hi:
        return None
    return u_lo, u_hi, v_lo, v_hi


def ellipse_mask(e: SearchEllipse, width: int, height: int) -> np.ndarray:
    """Integer pixels (u, v) inside the ellipse and the image, scan order.

    A pixel is inside when ((d.e_major)/l_major)^2 + ((d.e_minor)/l_minor)^2 <= 1
    for d the offset from the ellipse center.
    """
    bbox = _clipped_bbox(e, width, height)
    if bbox is None:
        return np.zeros((0, 2), dtype=np.int64)
    u_lo, u_hi, v_lo, v_hi = bbox
    du = np.arange(u_lo, u_hi + 1, dtype=np.float64) - e.center[0]
    dv = (np.arange(v_lo, v_hi + 1, dtype=np.float64) - e.center[1])[:, None]
    ea = (du * e.axes[0, 0] + dv * e.axes[1, 0]) / e.half_axes[0]
    eb = (du * e.axes[0, 1] + dv * e.axes[1, 1]) / e.half_axes[1]
    keep = ea * ea + eb * eb <= 1.0
    v_idx, u_idx = np.nonzero(keep)
    return np.column_stack([u_idx + u_lo, v_idx + v_lo])


def gate_depth(img: DepthImage, pixels: np.ndarray, e: SearchEllipse,
               sigma_floor: float = 0.05) -> np.ndarray:
    """Keep pixels whose depth is valid and within 3 max(sigma_z, floor) of prediction."""
    if pixels.shape[0] == 0:
        return pixels.reshape(0, 2)
    depths = img.data[pixels[:, 1], pixels[:, 0]].astype(np.float64)
    tol = 3.0 * max(e.sigma_z, sigma_floor)
    with np.errstate(invalid="ignore"):
        keep = np.isfinite(depths) & (depths > 0.0) & (np.abs(depths - e.depth_pred) <= tol)
    return pixels[keep]


def extract_contours(img: DepthImage, pixels: np.ndarray,
                     min_blob_px: int = 3) -> list[ContourCandidate]:
    """Group gated pixels into 8-connected blobs of at least min_blob_px."""
    if pixels.shape[0] == 0:
        return []
    u0, v0 = pixels[:, 0].min(), pixels[:, 1].min()
    grid = np.zeros((pixels[:, 1].max() - v0 + 1, pixels[:, 0].max() - u0 + 1), dtype=bool)
    grid[pixels[:, 1] - v0, pixels[:, 0] - u0] = True
    labels, n_blobs = ndimage.label(grid, structure=_EIGHT_CONNECTED)
    out = []
    for blob_id in range(1, n_blobs + 1):
        vs, us = np.nonzero(labels == blob_id)
        if us.size < min_blob_px:
            continue
        blob = np.column_stack([us + u0, vs + v0])
        depths = img.data[blob[:, 1], blob[:, 0]].astype(np.float64)
        out.append(ContourCandidate(
            pixels=blob,
            centroid=blob.mean(axis=0),
            mean_depth=float(depths.mean()),
        ))
    return out


def select_contour(candidates: list[ContourCandidate], center) -> ContourCandidate:
    """Nearest centroid to the predicted center; ties favor larger blobs,
    then the smaller (v, u) lexicographic centroid."""
    if not candidates:
        raise NoContour("no contour candidates")
    cu, cv = float(center[0]), float(center[1])
    return min(candidates, key=lambda c: (
        math.hypot(c.centroid[0] - cu, c.centroid[1] - cv),
        -c.count,
        c.centroid[1],
        c.centroid[0],
    ))


def reacquire(img: DepthImage, state: StateEstimate, cam: CameraModel,
              cfg: SearchConfig) -> PositionMeasurement:
    """Full reacquisition chain: ellipse, gate, blobs, pick, back-project."""
    if img.width != cam.width or img.height != cam.height:
        raise ValueError("image dimensions do not match the camera model")
    ellipse = build_search_ellipse(state, cam, cfg)
    inside = ellipse_mask(ellipse, cam.width, cam.height)
    if inside.shape[0] == 0:
        raise OffImage("search ellipse covers no image pixels")
    gated = gate_depth(img, inside, ellipse, cfg.sigma_z_floor)
    best = select_contour(extract_contours(img, gated, cfg.min_blob_px), ellipse.center)
    p_cam = cam.back_project(best.centroid, best.mean_depth)
    return PositionMeasurement(
        position=cam.cam_to_map.apply(p_cam),
        stamp=img.stamp,
        source=MeasurementSource.KF_GUIDED,
    )
