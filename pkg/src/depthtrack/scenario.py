"""Scenario files: flat, typed key-value configs for benchmark runs.

Format: one ``key = value`` per line, ``#`` starts a comment, blank
lines ignored.  Keys are flat (no sections); unknown or duplicate keys
are errors.  All problems found in a file are reported together in one
ConfigError, one line per field.

Schema (type, default; a dash means the key is required):

    name                str    file stem     display name
    trajectory          str    -             static | circle | fig8
    center_x            float  0.0           m, path center
    center_y            float  0.0           m
    altitude            float  10.0          m, flight plane height
    radius              float  0.0           m, path scale (circle/fig8)
    speed               float  0.0           m/s, path rate (circle/fig8)
    duration            float  120.0         s
    frame_rate          float  20.0          Hz
    predict_rate        float  100.0         Hz
    seed                int    0
    target_radius       float  0.25          m, target sphere radius
    cam_x, cam_y, cam_z float  -             m, camera position (map)
    look_x              float  center_x      m, camera aim point
    look_y              float  center_y      m
    look_z              float  altitude      m
    cam_width           int    640           px
    cam_height          int    480           px
    cam_fx, cam_fy      float  500.0         px
    cam_cx              float  320.0         px
    cam_cy              float  240.0         px
    depth_sigma_rel     float  0.01          relative depth noise sigma
    pixel_dropout       float  0.0           fraction of lost returns
    backplane_depth     float  0.0           m, flat wall behind target (0 = none)
    detect_prob         float  1.0           per-frame detection probability
    burst_period        float  0.0           s between outage windows (0 = none)
    burst_duration      float  0.0           s per outage window
    bbox_pad_px         int    2             px, box padding
    bbox_jitter_px      int    1             px, box jitter amplitude
    alpha_roi           float  5.0           search ellipse scale
    min_axis_px         float  4.0           px, ellipse half-axis floor
    max_axis_frac       float  0.5           ellipse half-axis cap fraction
    sigma_z_floor       float  0.05          m, depth gate sigma floor
    min_blob_px         int    3             px, smallest accepted blob
    require_inside      int    0             1: reject ellipses crossing the edge
    stale_timeout       float  1.0           s without a fix before stale
    settle_time         float  5.0           s excluded from error metrics
    q_scale             float  25.0          m^2/s^3 process noise density
    r_var_x/_y/_z       float  1.6e-3        m^2 measurement variances
    p0_pos              float  1.0           m^2 initial position variance
    p0_vel              float  25.0          m^2/s^2 initial velocity variance
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import CameraModel, look_at
from .kalman import FilterConfig
from .reacquire import SearchConfig
from .sim import (DetectorModel, ScenarioConfig, SensorNoise, Trajectory,
                  TrajectoryKind)


class ConfigError(Exception):
    """One or more scenario fields are missing, malformed, or inconsistent."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


_REQUIRED = object()

# key -> (type tag, default); type tags: float, int, str
_SCHEMA: dict[str, tuple[type, object]] = {
    "name": (str, None),
    "trajectory": (str, _REQUIRED),
    "center_x": (float, 0.0),
    "center_y": (float, 0.0),
    "altitude": (float, 10.0),
    "radius": (float, 0.0),
    "speed": (float, 0.0),
    "duration": (float, 120.0),
    "frame_rate": (float, 20.0),
    "predict_rate": (float, 100.0),
    "seed": (int, 0),
    "target_radius": (float, 0.25),
    "cam_x": (float, _REQUIRED),
    "cam_y": (float, _REQUIRED),
    "cam_z": (float, _REQUIRED),
    "look_x": (float, None),
    "look_y": (float, None),
    "look_z": (float, None),
    "cam_width": (int, 640),
    "cam_height": (int, 480),
    "cam_fx": (float, 500.0),
    "cam_fy": (float, 500.0),
    "cam_cx": (float, 320.0),
    "cam_cy": (float, 240.0),
    "depth_sigma_rel": (float, 0.01),
    "pixel_dropout": (float, 0.0),
    "backplane_depth": (float, 0.0),
    "detect_prob": (float, 1.0),
    "burst_period": (float, 0.0),
    "burst_duration": (float, 0.0),
    "bbox_pad_px": (int, 2),
    "bbox_jitter_px": (int, 1),
    "alpha_roi": (float, 5.0),
    "min_axis_px": (float, 4.0),
    "max_axis_frac": (float, 0.5),
    "sigma_z_floor": (float, 0.05),
    "min_blob_px": (int, 3),
    "require_inside": (int, 0),
    "stale_timeout": (float, 1.0),
    "settle_time": (float, 5.0),
    "q_scale": (float, 25.0),
    "r_var_x": (float, 1.6e-3),
    "r_var_y": (float, 1.6e-3),
    "r_var_z": (float, 1.6e-3),
    "p0_pos": (float, 1.0),
    "p0_vel": (float, 25.0),
}

_KINDS = {k.value: k for k in TrajectoryKind}


def parse_scenario(text: str, name: str = "scenario") -> ScenarioConfig:
    """Parse scenario text into a validated ScenarioConfig."""
    problems: list[str] = []
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            problems.append(f"line {lineno}: expected 'key = value', got {body!r}")
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _SCHEMA:
            problems.append(f"line {lineno}: unknown key {key!r}")
        elif key in raw:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        elif not value:
            problems.append(f"line {lineno}: key {key!r} has no value")
        else:
            raw[key] = value

    values: dict[str, object] = {}
    for key, (typ, default) in _SCHEMA.items():
        if key in raw:
            try:
                values[key] = typ(raw[key])
            except ValueError:
                problems.append(f"{key}: expected {typ.__name__}, got {raw[key]!r}")
        elif default is _REQUIRED:
            problems.append(f"{key}: required key is missing")
        else:
            values[key] = default
    if problems:
        raise ConfigError(problems)

    if values["name"] is None:
        values["name"] = name
    if values["look_x"] is None:
        values["look_x"] = values["center_x"]
    if values["look_y"] is None:
        values["look_y"] = values["center_y"]
    if values["look_z"] is None:
        values["look_z"] = values["altitude"]
    if values["trajectory"] not in _KINDS:
        raise ConfigError([f"trajectory: expected one of {sorted(_KINDS)}, "
                           f"got {values['trajectory']!r}"])

    def build(field: str, ctor, *args, **kwargs):
        try:
            return ctor(*args, **kwargs)
        except ValueError as err:
            problems.append(f"{field}: {err}")
            return None

    trajectory = build("trajectory", Trajectory,
                       kind=_KINDS[values["trajectory"]],
                       center=np.array([values["center_x"], values["center_y"],
                                        values["altitude"]]),
                       radius=values["radius"], speed=values["speed"])
    noise = build("noise", SensorNoise,
                  depth_sigma_rel=values["depth_sigma_rel"],
                  pixel_dropout=values["pixel_dropout"])
    detector = build("detector", DetectorModel,
                     detect_prob=values["detect_prob"],
                     burst_period=values["burst_period"],
                     burst_duration=values["burst_duration"],
                     bbox_pad_px=values["bbox_pad_px"],
                     bbox_jitter_px=values["bbox_jitter_px"])
    pose = build("camera pose", look_at,
                 eye=(values["cam_x"], values["cam_y"], values["cam_z"]),
                 target=(values["look_x"], values["look_y"], values["look_z"]))
    camera = None
    if pose is not None:
        camera = build("camera", CameraModel,
                       fx=values["cam_fx"], fy=values["cam_fy"],
                       cx=values["cam_cx"], cy=values["cam_cy"],
                       width=values["cam_width"], height=values["cam_height"],
                       cam_to_map=pose)
    filter_cfg = build("filter", FilterConfig,
                       q_scale=values["q_scale"],
                       r_diag=(values["r_var_x"], values["r_var_y"], values["r_var_z"]),
                       p0_pos=values["p0_pos"], p0_vel=values["p0_vel"],
                       stale_timeout=values["stale_timeout"])
    search = build("search", SearchConfig,
                   alpha_roi=values["alpha_roi"],
                   min_axis_px=values["min_axis_px"],
                   max_axis_frac=values["max_axis_frac"],
                   sigma_z_floor=values["sigma_z_floor"],
                   min_blob_px=values["min_blob_px"],
                   require_inside=bool(values["require_inside"]))
    if problems:
        raise ConfigError(problems)

    try:
        return ScenarioConfig(
            name=values["name"],
            trajectory=trajectory, noise=noise, detector=detector,
            camera=camera, filter=filter_cfg, search=search,
            target_radius=values["target_radius"],
            duration=values["duration"],
            frame_rate=values["frame_rate"],
            predict_rate=values["predict_rate"],
            seed=values["seed"],
            backplane_depth=values["backplane_depth"],
            settle_time=values["settle_time"],
        )
    except ValueError as err:
        raise ConfigError([f"scenario: {err}"]) from err


def load_scenario(path) -> ScenarioConfig:
    """Load a scenario file from disk."""
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


def builtin_names() -> list[str]:
    """Names of scenarios shipped with the package."""
    pkg = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-4] for p in pkg.iterdir() if p.name.endswith(".scn"))


def load_builtin(name: str) -> ScenarioConfig:
    """Load a shipped scenario by name (see builtin_names())."""
    res = resources.files(__package__) / "scenarios" / f"{name}.scn"
    if not res.is_file():
        raise ConfigError([f"scenario: no builtin named {name!r}; "
                           f"available: {', '.join(builtin_names())}"])
    return parse_scenario(res.read_text(encoding="utf-8"), name=name)


def resolve_scenario(spec: str) -> ScenarioConfig:
    """Treat spec as a path if it exists on disk, else as a builtin name."""
    if Path(spec).is_file():
        return load_scenario(spec)
    return load_builtin(spec)
