"""Command-line front end: run scenarios, compare modes, rebuild fixtures."""

from __future__ import annotations

import argparse
import dataclasses
import multiprocessing
import sys
from pathlib import Path

from .bench import Mode, aggregate, compare_report, emit_csv, run_scenario
from .localize import write_pgm
from .scenario import ConfigError, builtin_names, load_builtin, resolve_scenario
from .sim import render_depth, truth_state

# Flag spellings, kept shorter than the Mode enum values.
_MODES = {"feedback": Mode.KF_FEEDBACK, "measurements-only": Mode.MEASUREMENTS_ONLY}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="depthtrack",
        description="Depth-camera target tracking benchmarks with "
                    "filter-guided reacquisition.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario in one mode")
    run_p.add_argument("--scenario", required=True,
                       help=f"scenario file path or builtin ({', '.join(builtin_names())})")
    run_p.add_argument("--mode", choices=sorted(_MODES), default="feedback")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's seed")
    run_p.add_argument("--out-csv", default=None, metavar="FILE",
                       help="write per-frame records as CSV")
    run_p.add_argument("--dump-frames", default=None, metavar="DIR",
                       help="write every rendered depth frame as 16-bit PGM")

    cmp_p = sub.add_parser("compare", help="run scenarios in both modes and tabulate")
    cmp_p.add_argument("--scenario", action="append", required=True,
                       help="repeatable; scenario file path or builtin name")
    cmp_p.add_argument("--seeds", type=int, default=1,
                       help="run seeds 0..N-1 and average (default 1)")
    cmp_p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for the (scenario, mode, seed) grid")

    fix_p = sub.add_parser("fixtures", help="regenerate golden test fixtures")
    fix_p.add_argument("--out-dir", default="fixtures", metavar="DIR")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_fixtures(args)
    except ConfigError as err:
        print(f"scenario config error:\n{err}", file=sys.stderr)
        return 2


def _cmd_run(args) -> int:
    cfg = resolve_scenario(args.scenario)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    mode = _MODES[args.mode]
    records, summary = run_scenario(cfg, mode)
    print(compare_report([(cfg.name, mode, summary)]))
    if args.out_csv:
        emit_csv(records, args.out_csv)
        print(f"wrote {len(records)} records to {args.out_csv}")
    if args.dump_frames:
        out = Path(args.dump_frames)
        out.mkdir(parents=True, exist_ok=True)
        n_frames = int(round(cfg.duration * cfg.frame_rate))
        for k in range(n_frames):
            t = k / cfg.frame_rate
            pos, _ = truth_state(cfg.trajectory, t)
            write_pgm(render_depth(cfg, pos, t, k), out / f"frame_{k:06d}.pgm")
        print(f"wrote {n_frames} frames to {out}")
    return 0


def _compare_job(job):
    """One (scenario, mode, seed) cell; top level so worker pools can pickle it."""
    source, mode_name, seed = job
    cfg = resolve_scenario(source)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return run_scenario(cfg, Mode(mode_name))[1]


def _cmd_compare(args) -> int:
    if args.seeds < 1:
        raise ConfigError(["seeds: must be at least 1"])
    if args.jobs < 1:
        raise ConfigError(["jobs: must be at least 1"])
    names = []
    jobs = []
    for source in args.scenario:
        names.append(resolve_scenario(source).name)
        for mode in (Mode.KF_FEEDBACK, Mode.MEASUREMENTS_ONLY):
            for seed in range(args.seeds):
                jobs.append((source, mode.value, seed if args.seeds > 1 else None))
    if args.jobs == 1:
        results = [_compare_job(job) for job in jobs]
    else:
        # Grid cells are independent; order of `jobs` fixes the merge order,
        # so the table is identical at any worker count.
        with multiprocessing.Pool(args.jobs) as pool:
            results = pool.map(_compare_job, jobs)
    rows = []
    cell = 0
    for name in names:
        for mode in (Mode.KF_FEEDBACK, Mode.MEASUREMENTS_ONLY):
            rows.append((name, mode, aggregate(results[cell:cell + args.seeds])))
            cell += args.seeds
    print(compare_report(rows))
    return 0


def generate_fixtures(out_dir) -> list[Path]:
    """Write the golden fixture set; returns the paths written.

    Deterministic by construction, so regenerating over a clean checkout
    must be a no-op; the fixture tests rely on that.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for name in ("static", "circle"):
        cfg = load_builtin(name)
        pos, _ = truth_state(cfg.trajectory, 0.0)
        img = render_depth(cfg, pos, 0.0, 0)
        path = out / f"{name}_frame0.pgm"
        write_pgm(img, path)
        written.append(path)

    cfg = dataclasses.replace(load_builtin("static"), duration=2.0)
    records, _ = run_scenario(cfg, Mode.KF_FEEDBACK)
    path = out / "static_2s_feedback.csv"
    emit_csv(records, path)
    written.append(path)
    return written


def _cmd_fixtures(args) -> int:
    for path in generate_fixtures(args.out_dir):
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
