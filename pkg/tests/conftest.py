"""Shared fixtures, including the 20-seed circle sweep reused by the
acceptance suite and the mode-dominance property test."""

import dataclasses
import time

import pytest

from depthtrack import (CameraModel, Mode, RigidTransform, load_builtin,
                        run_scenario)


@pytest.fixture()
def straight_camera():
    """Map frame equals camera frame; principal point at pixel (20, 20)."""
    return CameraModel(fx=100.0, fy=100.0, cx=20.0, cy=20.0,
                       width=41, height=41,
                       cam_to_map=RigidTransform.identity())


@pytest.fixture(scope="session")
def circle_sweep():
    """Both modes of the circle scenario over seeds 0..19.

    Returns (rows, wall_seconds) where rows are (seed, feedback_summary,
    measurements_only_summary).  Session-scoped because the sweep is the
    most expensive thing the suite does and three tests consume it.
    """
    base = load_builtin("circle")
    rows = []
    start = time.perf_counter()
    for seed in range(20):
        cfg = dataclasses.replace(base, seed=seed)
        kf = run_scenario(cfg, Mode.KF_FEEDBACK)[1]
        mo = run_scenario(cfg, Mode.MEASUREMENTS_ONLY)[1]
        rows.append((seed, kf, mo))
    wall = time.perf_counter() - start
    return rows, wall
