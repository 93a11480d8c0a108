"""Primary localization: a detector bounding box plus depth to a 3D map fix.

A depth image stores z-depth in meters, row-major, with 0 or NaN marking
pixels with no return.  Boxes use inclusive integer pixel corners.  The
depth of a detection is the mean of valid pixels in a centered
sub-window covering the middle 50% of the box area, which keeps box
edges (background bleed, partial occlusion) out of the estimate; an
empty sub-window falls back to the full box before giving up.

Images round-trip through 16-bit binary PGM (P5, maxval 65535) storing
millimeters, 0 = invalid, so fixtures stay bit-exact on disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel
from .kalman import MeasurementSource, PositionMeasurement

PGM_MAXVAL = 65535


class NoValidDepth(Exception):
    """No valid depth pixel in the box; localization fails this frame."""


@dataclass(frozen=True, eq=False)
class DepthImage:
    """One depth frame.  The array is adopted, not copied; treat it as
    immutable once handed over."""

    data: np.ndarray  # (height, width) float32 meters; 0 or NaN = no return
    stamp: float      # seconds

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("data must be a non-empty 2D array")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def valid_mask(img: DepthImage) -> np.ndarray:
    """Boolean (height, width) mask of pixels with a usable return."""
    with np.errstate(invalid="ignore"):
        return np.isfinite(img.data) & (img.data > 0.0)


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel-corner detector box."""

    u_min: int
    v_min: int
    u_max: int
    v_max: int

    def __post_init__(self):
        if self.u_min < 0 or self.v_min < 0:
            raise ValueError("box corners must be non-negative")
        if self.u_min > self.u_max or self.v_min > self.v_max:
            raise ValueError("box corners are not ordered")


def bbox_center(box: BoundingBox) -> np.ndarray:
    """Continuous center pixel of a box."""
    return np.array([0.5 * (box.u_min + box.u_max), 0.5 * (box.v_min + box.v_max)])


def _sub_window(box: BoundingBox) -> BoundingBox:
    """Centered sub-box covering the middle 50% of the area.

    Each side shrinks by 1/sqrt(2) (round half up, floor 1 px) and the
    leftover margin splits evenly with the smaller half leading.
    """
    width = box.u_max - box.u_min + 1
    height = box.v_max - box.v_min + 1
    sub_w = max(1, int(width / math.sqrt(2.0) + 0.5))
    sub_h = max(1, int(height / math.sqrt(2.0) + 0.5))
    u0 = box.u_min + (width - sub_w) // 2
    v0 = box.v_min + (height - sub_h) // 2
    return BoundingBox(u0, v0, u0 + sub_w - 1, v0 + sub_h - 1)


def _mean_valid(img: DepthImage, box: BoundingBox) -> float | None:
    patch = img.data[box.v_min:box.v_max + 1, box.u_min:box.u_max + 1]
    with np.errstate(invalid="ignore"):
        good = np.isfinite(patch) & (patch > 0.0)
    if not good.any():
        return None
    return float(np.mean(patch[good], dtype=np.float64))


def bbox_depth(img: DepthImage, box: BoundingBox) -> float:
    """Mean valid depth of the box's central sub-window (full box as fallback)."""
    depth = _mean_valid(img, _sub_window(box))
    if depth is None:
        depth = _mean_valid(img, box)
    if depth is None:
        raise NoValidDepth("no valid depth pixel inside the box")
    return depth


def localize(img: DepthImage, box: BoundingBox, cam: CameraModel) -> PositionMeasurement:
    """Box center + box depth, back-projected and lifted to the map frame."""
    if box.u_max >= img.width or box.v_max >= img.height:
        raise ValueError("box extends outside the image")
    center = bbox_center(box)
    depth = bbox_depth(img, box)
    p_cam = cam.back_project(center, depth)
    return PositionMeasurement(
        position=cam.cam_to_map.apply(p_cam),
        stamp=img.stamp,
        source=MeasurementSource.PRIMARY_DETECTOR,
    )


def write_pgm(img: DepthImage, path) -> None:
    """Write as 16-bit binary PGM, depth in millimeters, 0 = invalid."""
    data = np.asarray(img.data, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        good = np.isfinite(data) & (data > 0.0)
    mm = np.where(good, np.rint(np.clip(data * 1000.0, 0.0, PGM_MAXVAL)), 0.0)
    header = f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mm.astype(">u2").tobytes())


def read_pgm(path, stamp: float = 0.0) -> DepthImage:
    """Read a 16-bit binary PGM written by write_pgm (or compatible)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    magic, rest = blob.split(None, 1)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    fields = []
    pos = 0
    while len(fields) < 3:
        while pos < len(rest) and rest[pos:pos + 1].isspace():
            pos += 1
        if rest[pos:pos + 1] == b"#":                    # comment to end of line
            pos = rest.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(rest) and not rest[end:end + 1].isspace():
            end += 1
        fields.append(int(rest[pos:end]))
        pos = end
    pos += 1                                             # single whitespace after maxval
    width, height, maxval = fields
    if maxval != PGM_MAXVAL:
        raise ValueError(f"{path}: expected maxval {PGM_MAXVAL}, got {maxval}")
    raw = np.frombuffer(rest, dtype=">u2", count=width * height, offset=pos)
    data = (raw.reshape(height, width) / 1000.0).astype(np.float32)
    return DepthImage(data=data, stamp=stamp)
