"""Depth-camera target tracking with Kalman-filter-guided reacquisition.

A constant-velocity filter tracks a target from depth-image detections;
when the primary detector drops out, the predicted state is projected
back into the image as a search ellipse and the measurement is
reacquired from the depth data itself, keeping the track alive through
detector gaps.  Includes a synthetic depth-scene simulator and a
benchmark CLI comparing feedback tracking against detector-only runs.
"""

from .bench import (CSV_HEADER, FrameRecord, Mode, RunSummary, aggregate,
                    compare_report, emit_csv, parse_csv, run_scenario,
                    summarize)
from .geometry import (BehindCamera, CameraModel, NonPositiveDepth,
                       RigidTransform, eigh2x2, look_at)
from .kalman import (FilterConfig, MeasurementSource, NonPositiveDt,
                     PositionMeasurement, SingularInnovation, StateEstimate,
                     initialize, make_process_noise, make_transition, predict,
                     predict_with, update)
from .localize import (BoundingBox, DepthImage, NoValidDepth, bbox_center,
                       bbox_depth, localize, read_pgm, valid_mask, write_pgm)
from .reacquire import (ContourCandidate, NoContour, OffImage, SearchConfig,
                        SearchEllipse, build_search_ellipse, ellipse_mask,
                        extract_contours, gate_depth, reacquire, select_contour)
from .scenario import (ConfigError, builtin_names, load_builtin, load_scenario,
                       parse_scenario, resolve_scenario)
from .sim import (DetectorModel, ScenarioConfig, SensorNoise, Trajectory,
                  TrajectoryKind, detect, in_burst_outage, render_depth,
                  truth_state)

__version__ = "0.1.0"

__all__ = [
    "BehindCamera", "BoundingBox", "CSV_HEADER", "CameraModel", "ConfigError",
    "ContourCandidate", "DepthImage", "DetectorModel", "FilterConfig",
    "FrameRecord", "MeasurementSource", "Mode", "NoContour", "NoValidDepth",
    "NonPositiveDepth", "NonPositiveDt", "OffImage", "PositionMeasurement",
    "RigidTransform", "RunSummary", "ScenarioConfig", "SearchConfig",
    "SearchEllipse", "SensorNoise", "SingularInnovation", "StateEstimate",
    "Trajectory", "TrajectoryKind", "aggregate", "bbox_center", "bbox_depth",
    "build_search_ellipse", "builtin_names", "compare_report", "detect",
    "eigh2x2", "ellipse_mask", "emit_csv", "extract_contours", "gate_depth",
    "in_burst_outage", "initialize", "load_builtin", "load_scenario",
    "localize", "look_at", "make_process_noise", "make_transition",
    "parse_csv", "parse_scenario", "predict", "predict_with", "read_pgm",
    "reacquire", "render_depth", "resolve_scenario", "run_scenario",
    "select_contour", "summarize", "truth_state", "update", "valid_mask",
    "write_pgm",
]
