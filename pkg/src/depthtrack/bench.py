"""Benchmark loop: run a scenario, track the target, score the estimate.

Per frame: render depth, run the detector error model; a detection is
localized and fused as a primary fix.  In KF-feedback mode a missed
frame instead triggers reacquisition from the predicted state, provided
the track is fresh (had any fix within the staleness timeout).  Between
frames the filter predicts forward in sub-steps at the configured
prediction rate.  A stale track is never used for reacquisition; it
re-initializes on the next primary detection.

Records start at the first primary detection (there is no estimate to
score before that) and error metrics skip the configured settle time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import BehindCamera
from .kalman import (FilterConfig, MeasurementSource, PositionMeasurement,
                     StateEstimate, initialize, make_process_noise,
                     make_transition, predict_with, update)
from .localize import NoValidDepth, localize
from .reacquire import NoContour, OffImage, reacquire
from .sim import ScenarioConfig, detect, render_depth, truth_state

CSV_HEADER = "t,truth_x,truth_y,truth_z,est_x,est_y,est_z,err,source,cov_trace"


class Mode(Enum):
    MEASUREMENTS_ONLY = "measurements_only"
    KF_FEEDBACK = "kf_feedback"


@dataclass(frozen=True, eq=False)
class FrameRecord:
    t: float
    truth_pos: np.ndarray             # (3,)
    est_pos: np.ndarray               # (3,)
    est_vel: np.ndarray               # (3,); NaN when parsed back from CSV
    pos_error: float                  # |truth - est|, m
    source: MeasurementSource | None  # measurement fused this frame, if any
    cov_trace: float                  # trace of the position covariance block, m^2


@dataclass(frozen=True)
class RunSummary:
    rmse: float                 # m, over frames past the settle time
    max_error: float            # m, same window
    frames_total: int
    frames_primary: int
    frames_kf_guided: int
    frames_none: int
    mean_target_distance: float # m, camera to truth


def run_scenario(cfg: ScenarioConfig, mode: Mode) -> tuple[list[FrameRecord], RunSummary]:
    """Roll the scenario forward and score every frame after track start."""
    n_frames = int(round(cfg.duration * cfg.frame_rate))
    n_sub = max(1, int(round(cfg.predict_rate / cfg.frame_rate)))
    dt_sub = 1.0 / cfg.frame_rate / n_sub
    f_sub = make_transition(dt_sub)
    q_sub = make_process_noise(dt_sub, cfg.filter.q_scale)
    cam = cfg.camera
    cam_pos = cam.cam_to_map.translation

    track: StateEstimate | None = None
    last_fix_t = -math.inf
    records: list[FrameRecord] = []

    for k in range(n_frames):
        t = k / cfg.frame_rate
        truth_pos, _ = truth_state(cfg.trajectory, t)
        if track is not None:
            for _ in range(n_sub):
                track = predict_with(track, f_sub, q_sub, dt_sub)
        # Rendering is pure, so frames nothing will look at are skipped.
        box = detect(cfg, truth_pos, t, k)
        img = render_depth(cfg, truth_pos, t, k) if box is not None else None

        meas: PositionMeasurement | None = None
        if box is not None:
            try:
                meas = localize(img, box, cam)
            except NoValidDepth:
                meas = None
        fresh = track is not None and (t - last_fix_t) <= cfg.filter.stale_timeout
        if meas is None and mode is Mode.KF_FEEDBACK and fresh:
            if img is None:
                img = render_depth(cfg, truth_pos, t, k)
            try:
                meas = reacquire(img, track, cam, cfg.search)
            except (BehindCamera, OffImage, NoContour):
                meas = None

        if meas is not None:
            if meas.source is MeasurementSource.PRIMARY_DETECTOR and not fresh:
                track = initialize(meas, cfg.filter)
            else:
                track = update(track, meas, cfg.filter)
            last_fix_t = t

        if track is not None:
            # predict/update never mutate state arrays, so views are safe
            err = float(np.linalg.norm(truth_pos - track.position))
            records.append(FrameRecord(
                t=t,
                truth_pos=truth_pos,
                est_pos=track.position,
                est_vel=track.velocity,
                pos_error=err,
                source=None if meas is None else meas.source,
                cov_trace=float(np.trace(track.cov[:3, :3])),
            ))

    return records, summarize(records, cfg, cam_pos)


def summarize(records: list[FrameRecord], cfg: ScenarioConfig,
              cam_pos: np.ndarray) -> RunSummary:
    """Score a rollout; error metrics skip frames before the settle time."""
    scored = [r.pos_error for r in records if r.t >= cfg.settle_time]
    if scored:
        rmse = math.sqrt(float(np.mean(np.square(scored))))
        max_error = float(np.max(scored))
    else:
        rmse = max_error = math.nan
    n_primary = sum(1 for r in records if r.source is MeasurementSource.PRIMARY_DETECTOR)
    n_guided = sum(1 for r in records if r.source is MeasurementSource.KF_GUIDED)
    if records:
        mean_dist = float(np.mean([np.linalg.norm(r.truth_pos - cam_pos) for r in records]))
    else:
        mean_dist = math.nan
    return RunSummary(
        rmse=rmse,
        max_error=max_error,
        frames_total=len(records),
        frames_primary=n_primary,
        frames_kf_guided=n_guided,
        frames_none=len(records) - n_primary - n_guided,
        mean_target_distance=mean_dist,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_csv(records: list[FrameRecord], path) -> None:
    """Write records with full-precision floats; byte-stable across runs."""
    lines = [CSV_HEADER]
    for r in records:
        source = "none" if r.source is None else r.source.value
        lines.append(",".join([
            _fmt(r.t),
            _fmt(r.truth_pos[0]), _fmt(r.truth_pos[1]), _fmt(r.truth_pos[2]),
            _fmt(r.est_pos[0]), _fmt(r.est_pos[1]), _fmt(r.est_pos[2]),
            _fmt(r.pos_error),
            source,
            _fmt(r.cov_trace),
        ]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def parse_csv(path) -> list[FrameRecord]:
    """Read emit_csv output.  Velocity is not in the CSV and comes back NaN."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing or wrong CSV header")
    sources = {m.value: m for m in MeasurementSource}
    records = []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 10:
            raise ValueError(f"{path}: expected 10 columns, got {len(cells)}")
        records.append(FrameRecord(
            t=float(cells[0]),
            truth_pos=np.array([float(c) for c in cells[1:4]]),
            est_pos=np.array([float(c) for c in cells[4:7]]),
            est_vel=np.full(3, math.nan),
            pos_error=float(cells[7]),
            source=None if cells[8] == "none" else sources[cells[8]],
            cov_trace=float(cells[9]),
        ))
    return records


def aggregate(summaries: list[RunSummary]) -> RunSummary:
    """Combine per-seed summaries of one scenario/mode: mean errors, worst peak."""
    if not summaries:
        raise ValueError("nothing to aggregate")
    return RunSummary(
        rmse=float(np.mean([s.rmse for s in summaries])),
        max_error=float(np.max([s.max_error for s in summaries])),
        frames_total=sum(s.frames_total for s in summaries),
        frames_primary=sum(s.frames_primary for s in summaries),
        frames_kf_guided=sum(s.frames_kf_guided for s in summaries),
        frames_none=sum(s.frames_none for s in summaries),
        mean_target_distance=float(np.mean([s.mean_target_distance for s in summaries])),
    )


def compare_report(rows: list[tuple[str, Mode, RunSummary]]) -> str:
    """Aligned text table of scenario x mode results."""
    header = ("scenario", "mode", "rmse_m", "max_err_m", "dist_m",
              "frames(primary/guided/none)")
    table = [header]
    for name, mode, s in rows:
        table.append((
            name, mode.value, f"{s.rmse:.3f}", f"{s.max_error:.3f}",
            f"{s.mean_target_distance:.2f}",
            f"{s.frames_total}({s.frames_primary}/{s.frames_kf_guided}/{s.frames_none})",
        ))
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
