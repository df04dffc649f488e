"""Command-line entry point: single trials, the grid sweep and clutter clearing.

Exit status is 0 on success, 1 when the task itself fails (a grasp that does
not succeed) and 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .core import ConfigError, DiskObject, PlanarVec, ReflexConfig, load_config
from .experiments import (CONTROLLERS, GRID_X, GRID_Y, NOMINAL_TARGET, clutter_summary, clutter_table_csv,
                          grid_csv, grid_summary, grid_svg, measure_realtime_factor, run_clutter,
                          run_grid_sweep, run_trial, write_trials_csv)
from .sim import EventLog

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CONFIG_ENV = "REFLEX_CONFIG"


class UsageError(Exception):
    pass


def _floats(text, n, what):
    parts = text.split(",")
    if len(parts) != n:
        raise UsageError(f"{what}: expected {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{what}: not a number in {text!r}") from None


def _controllers(text):
    names = tuple(c.strip() for c in text.split(",") if c.strip())
    if not names:
        raise UsageError("--controllers: empty list")
    for c in names:
        if c not in CONTROLLERS:
            raise UsageError(f"unknown controller {c!r}; expected one of {', '.join(CONTROLLERS)}")
    return names


def resolve_config(path=None):
    """--config wins over $REFLEX_CONFIG; with neither, the defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return ReflexConfig()
    if not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    return load_config(path)


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_grasp(args, cfg):
    if args.controller not in CONTROLLERS:
        raise UsageError(f"unknown controller {args.controller!r}; expected one of {', '.join(CONTROLLERS)}")
    objects = []
    for k, text in enumerate(args.object or []):
        x, y, r = _floats(text, 3, "--object")
        try:
            objects.append(DiskObject(f"obj{k}", PlanarVec(x, y), r, args.mass))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    target = _floats(args.target, 2, "--target") if args.target else NOMINAL_TARGET
    log = EventLog() if args.log else None
    rec = run_trial(args.controller, objects, target, cfg, args.seed, event_log=log)
    if log is not None:
        log.write(args.log)
    write_trials_csv([rec], args.record if args.record else sys.stdout)
    return EXIT_OK if rec.outcome == "SUCCEEDED" else EXIT_FAIL


def cmd_sweep(args, cfg):
    if not args.pitch > 0:
        raise UsageError(f"--pitch must be positive, got {args.pitch}")
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
    ex = _floats(args.extent_x, 2, "--extent-x")
    ey = _floats(args.extent_y, 2, "--extent-y")
    if ex[0] > ex[1] or ey[0] > ey[1]:
        raise UsageError("extent bounds must be given as lo,hi")
    controllers = _controllers(args.controllers)
    out = _out_dir(args.out_dir)
    res = run_grid_sweep(controllers, args.pitch, ex, ey, cfg, args.seed, args.jobs)
    grid_csv(res, out / "grid.csv")
    write_trials_csv(res.records, out / "trials.csv")
    rtf = None if args.no_rtf else f"{measure_realtime_factor():.1f}"
    text = grid_summary(res, rtf)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    if args.svg:
        (out / "grid.svg").write_text(grid_svg(res), encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_clutter(args, cfg):
    if args.episodes < 0 or args.objects < 1:
        raise UsageError("--episodes must be >= 0 and --objects >= 1")
    if args.noise < 0:
        raise UsageError(f"--noise must be >= 0, got {args.noise}")
    if args.jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {args.jobs}")
    controllers = _controllers(args.controllers)
    out = _out_dir(args.out_dir)
    res = run_clutter(args.episodes, args.objects, args.noise, args.seed, cfg, controllers, args.jobs)
    clutter_table_csv(res, controllers, out / "clutter_table.csv")
    write_trials_csv(res.records, out / "clutter_trials.csv")
    text = clutter_summary(res, controllers)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="reflexgrasp", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help=f"config file (flat TOML); defaults to ${CONFIG_ENV}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grasp", help="run one pick-and-place trial")
    g.add_argument("--controller", default="full", help="baseline, partial or full")
    g.add_argument("--object", action="append", metavar="X,Y,R",
                   help="disk in world coordinates (m); repeat for clutter, the first is grasped")
    g.add_argument("--mass", type=float, default=0.2, help="object mass (kg)")
    g.add_argument("--target", metavar="X,Y", help="commanded grasp target (default 0.30,0)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--log", help="write the per-tick event log CSV here")
    g.add_argument("--record", help="write the trial record CSV here instead of stdout")
    g.set_defaults(fn=cmd_grasp)

    s = sub.add_parser("sweep", help="displacement-grid success sets")
    s.add_argument("--pitch", type=float, default=0.025, help="grid pitch (m)")
    s.add_argument("--extent-x", default=f"{GRID_X[0]},{GRID_X[1]}", metavar="LO,HI")
    s.add_argument("--extent-y", default=f"{GRID_Y[0]},{GRID_Y[1]}", metavar="LO,HI")
    s.add_argument("--controllers", default=",".join(CONTROLLERS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--out-dir", default="sweep_out")
    s.add_argument("--svg", action="store_true", help="also render grid.svg")
    s.add_argument("--no-rtf", action="store_true", help="skip the real-time factor measurement")
    s.set_defaults(fn=cmd_sweep)

    c = sub.add_parser("clutter", help="clutter-clearing success table")
    c.add_argument("--episodes", type=int, default=20)
    c.add_argument("--objects", type=int, default=5)
    c.add_argument("--noise", type=float, default=0.010, help="perception noise sigma (m)")
    c.add_argument("--seed", type=int, default=3)
    c.add_argument("--controllers", default="full,baseline")
    c.add_argument("--jobs", type=int, default=1, help="worker processes")
    c.add_argument("--out-dir", default="clutter_out")
    c.set_defaults(fn=cmd_clutter)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)  # argparse itself exits 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.config)
        return args.fn(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"{ap.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
