"""Pick-and-place trials, the displacement-grid sweep and the clutter-clearing runs."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .baseline import BaselineController
from .core import DiskObject, GripperFrame, PlanarVec, ReflexConfig
from .fingers import LEFT, RIGHT, FingerState, default_finger
from .perception import Camera, OccludedObject, closest_visible, extract_target, synth_scan
from .reflex import HandGeometry, ReflexController
from .sim import EventLog, run_episode
from .world import WorldState

log = logging.getLogger(__name__)

CONTROLLERS = ("baseline", "partial", "full")
NOMINAL_TARGET = (0.30, 0.0)
CUP_RADIUS = 0.0325
GRID_X = (-0.100, 0.100)
GRID_Y = (-0.0875, 0.0875)
# hand-over to the place location: a lateral carry in the gripper frame
PLACE_OFFSET = (0.0, 0.30)

# radius (m), mass range (kg)
OBJECT_CLASSES = {
    "cup": (0.0325, (0.15, 0.25)),
    "apple": (0.035, (0.15, 0.25)),
    "can": (0.030, (0.25, 0.40)),
    "coffee": (0.025, (0.10, 0.20)),
    "bowl": (0.045, (0.20, 0.35)),
}
SHELF_X = (0.30, 0.55)
SHELF_Y = (-0.20, 0.20)
SHELF_GAP = 0.01
SCAN_POINTS = 60
MAX_PLACEMENT_TRIES = 1000

# published hardware success areas, reported next to ours for comparison only
REFERENCE_AREAS_MM2 = {"baseline": 11250.0, "partial": 14530.0, "full": 17500.0}


@dataclass
class TrialRecord:
    controller: str
    object_x: float
    object_y: float
    object_r: float
    object_class: str
    target_x: float
    target_y: float
    outcome: str
    pick_time: float
    place_time: float
    regrasp_count: int
    seed: int
    branches: str = ""
    trigger: str = ""
    note: str = ""
    diverged: bool = False

    def as_row(self):
        d = asdict(self)
        return [_cell(d[k]) for k in TRIAL_FIELDS]


TRIAL_FIELDS = tuple(TrialRecord.__dataclass_fields__)


def _cell(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".9g")
    return str(v)


def make_controller(name, target, object_radius, cfg=None):
    if name == "full":
        return ReflexController(target, cfg)
    if name == "partial":
        return ReflexController(target, cfg, regrasp=False)
    if name == "baseline":
        return BaselineController(target, 2.0 * object_radius, cfg)
    raise ValueError(f"unknown controller {name!r}; expected one of {', '.join(CONTROLLERS)}")


def run_trial(controller, objects, target, cfg=None, seed=0, start_pose=(0.0, 0.0, 0.0),
              grasp_object=None, params=None, event_log=None, world=None):
    """One simulated pick-and-place of ``grasp_object`` (default: the first object).

    ``controller`` is a name from CONTROLLERS. The gripper starts at
    ``start_pose`` with its hand open and drives toward ``target``. When
    ``world`` is given the trial runs in it (and mutates it) instead of a fresh
    scene built from ``objects``.
    """
    cfg = cfg or ReflexConfig()
    objects = list(objects)
    if world is None:
        world = WorldState.create(objects, GripperFrame(PlanarVec(start_pose[0], start_pose[1]), start_pose[2]),
                                  rng_seed=seed, params=params)
    else:
        world.set_base_velocity(0.0, 0.0)
    obj = grasp_object if grasp_object is not None else (objects[0] if objects else None)
    # the baseline opens for the object the vision system believes is there
    r_guess = obj.radius if obj is not None else CUP_RADIUS
    ctl = make_controller(controller, target, r_guess, cfg)
    ql, qr = ctl.open_pose()
    world.q[0] = ql
    world.q[1] = qr
    world.qd[:] = 0.0
    rng = np.random.default_rng(seed)
    if obj is None:
        res = run_episode(world, ctl, PLACE_OFFSET, None, cfg, rng=rng, log=event_log)
        label, ox, oy, orad = "", math.nan, math.nan, math.nan
    else:
        res = run_episode(world, ctl, PLACE_OFFSET, obj.id, cfg, rng=rng, log=event_log)
        label, ox, oy, orad = obj.class_label, obj.center.x, obj.center.y, obj.radius
    if obj is None and res.outcome == "SUCCEEDED":
        res.outcome = "FAILED"
    return TrialRecord(controller, ox, oy, orad, label, float(target[0]), float(target[1]),
                       res.outcome, res.pick_time, res.place_time, res.regrasp_count, int(seed),
                       "+".join(res.branches), res.trigger_cause, res.note or res.transport_reason,
                       res.diverged)


def write_trials_csv(records, path_or_buf):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_FIELDS)
    for r in records:
        w.writerow(r.as_row())
    return _emit(buf.getvalue(), path_or_buf)


def _emit(text, path_or_buf):
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ----------------------------------------------------------------------------
# grid sweep


def grid_axes(pitch, extent_x=GRID_X, extent_y=GRID_Y):
    """Cell offsets along each axis: every multiple of ``pitch`` inside the extent.

    The grid is anchored on the nominal spot so the zero-offset cell always exists.
    """
    if not pitch > 0:
        raise ValueError("pitch must be positive")

    def axis(lo, hi):
        k0 = math.ceil(lo / pitch - 1e-9)
        k1 = math.floor(hi / pitch + 1e-9)
        return [k * pitch for k in range(k0, k1 + 1)]

    return axis(*extent_x), axis(*extent_y)


@dataclass
class GridResult:
    pitch: float
    xs: list
    ys: list
    controllers: tuple
    outcomes: dict  # controller -> 2-D array of bool (len(ys), len(xs))
    records: list = field(default_factory=list)
    wall_time: float = 0.0
    sim_time: float = 0.0

    def area_mm2(self, controller):
        return int(np.count_nonzero(self.outcomes[controller])) * (self.pitch * 1000.0) ** 2

    @property
    def areas(self):
        return {c: self.area_mm2(c) for c in self.controllers}

    @property
    def realtime_factor(self):
        return self.sim_time / self.wall_time if self.wall_time > 0 else math.inf


def _grid_job(args):
    controller, ix, iy, x, y, cfg, seed = args
    obj = DiskObject("cup", PlanarVec(NOMINAL_TARGET[0] + x, NOMINAL_TARGET[1] + y), CUP_RADIUS, 0.2, "cup")
    t0 = time.perf_counter()
    world = WorldState.create([obj], rng_seed=seed)
    rec = run_trial(controller, [obj], NOMINAL_TARGET, cfg, seed, world=world)
    return ix, iy, rec, world.time, time.perf_counter() - t0


def run_grid_sweep(controllers=CONTROLLERS, pitch=0.025, extent_x=GRID_X, extent_y=GRID_Y,
                   cfg=None, seed=0, jobs=1):
    """Displace the cup over a grid around the nominal spot; the commanded target never moves."""
    cfg = cfg or ReflexConfig()
    for c in controllers:
        if c not in CONTROLLERS:
            raise ValueError(f"unknown controller {c!r}")
    xs, ys = grid_axes(pitch, extent_x, extent_y)
    tasks = [(c, ix, iy, x, y, cfg, seed)
             for c in controllers for iy, y in enumerate(ys) for ix, x in enumerate(xs)]
    results = _map(_grid_job, tasks, jobs)
    outcomes = {c: np.zeros((len(ys), len(xs)), dtype=bool) for c in controllers}
    records = []
    sim_t = wall_t = 0.0
    for (c, *_), (ix, iy, rec, st, wt) in zip(tasks, results):
        outcomes[c][iy, ix] = rec.outcome == "SUCCEEDED"
        records.append(rec)
        sim_t += st
        wall_t += wt
    return GridResult(pitch, xs, ys, tuple(controllers), outcomes, records, wall_t, sim_t)


def _map(fn, tasks, jobs):
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as ex:
        # map preserves submission order, so the merge is independent of scheduling
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def grid_csv(result, path_or_buf=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dx", "dy"] + list(result.controllers))
    for iy, y in enumerate(result.ys):
        for ix, x in enumerate(result.xs):
            w.writerow([_cell(x), _cell(y)] + [str(int(result.outcomes[c][iy, ix])) for c in result.controllers])
    return _emit(buf.getvalue(), path_or_buf)


def grid_summary(result, realtime=None):
    """Human-readable summary; ``realtime`` overrides the measured real-time factor line."""
    areas = result.areas
    lines = [f"pitch_mm = {result.pitch * 1000:.6g}",
             f"cells = {len(result.xs) * len(result.ys)}"]
    for c in result.controllers:
        n = int(np.count_nonzero(result.outcomes[c]))
        ref = REFERENCE_AREAS_MM2.get(c)
        lines.append(f"area_{c}_mm2 = {areas[c]:.6g}  ({n} cells; reference {ref:.6g})")
    base = areas.get("baseline")
    if base:
        for c in result.controllers:
            if c != "baseline":
                ref = REFERENCE_AREAS_MM2[c] / REFERENCE_AREAS_MM2["baseline"]
                lines.append(f"ratio_{c}_over_baseline = {areas[c] / base:.4f}  (reference {ref:.4f})")
    if realtime is not None:
        lines.append(f"realtime_factor = {realtime}")
    return "\n".join(lines) + "\n"


def grid_svg(result, cell_px=24):
    """Nested success sets drawn as coloured cells (baseline darkest)."""
    colours = {"baseline": "#1b4f72", "partial": "#2e86c1", "full": "#aed6f1"}
    nx, ny = len(result.xs), len(result.ys)
    w, h = nx * cell_px + 20, ny * cell_px + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
           f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>']
    order = [c for c in ("full", "partial", "baseline") if c in result.controllers]
    for iy in range(ny):
        for ix in range(nx):
            fill = "#eeeeee"
            for c in order:
                if result.outcomes[c][iy, ix]:
                    fill = colours[c]
            # +y up on the page
            px, py = 10 + ix * cell_px, 10 + (ny - 1 - iy) * cell_px
            out.append(f'<rect x="{px}" y="{py}" width="{cell_px - 1}" height="{cell_px - 1}" fill="{fill}"/>')
    lx = 10
    for c in order[::-1]:
        out.append(f'<rect x="{lx}" y="{h - 22}" width="12" height="12" fill="{colours[c]}"/>')
        out.append(f'<text x="{lx + 16}" y="{h - 12}" font-size="12" font-family="sans-serif">{c}</text>')
        lx += 90
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ----------------------------------------------------------------------------
# clutter clearing


def sample_scene(n_objects, rng, classes=None):
    """Non-overlapping disks on the shelf by rejection sampling; None if it cannot be done."""
    classes = sorted(classes or OBJECT_CLASSES)
    objs = []
    tries = 0
    while len(objs) < n_objects:
        label = classes[int(rng.integers(len(classes)))]
        r, (m0, m1) = OBJECT_CLASSES[label]
        placed = False
        while tries < MAX_PLACEMENT_TRIES:
            tries += 1
            x = rng.uniform(SHELF_X[0] + r, SHELF_X[1] - r)
            y = rng.uniform(SHELF_Y[0] + r, SHELF_Y[1] - r)
            if all(math.hypot(x - o.center.x, y - o.center.y) >= r + o.radius + SHELF_GAP for o in objs):
                placed = True
                break
        if not placed:
            return None
        objs.append(DiskObject(f"{label}{len(objs)}", PlanarVec(x, y), r, float(rng.uniform(m0, m1)), label))
    return objs


@dataclass
class ClutterResult:
    records: list
    episodes_run: int
    episodes_skipped: int

    def table(self, controller="full"):
        """class -> (successes, trials)."""
        tab = {}
        for r in self.records:
            if r.controller != controller:
                continue
            s, n = tab.get(r.object_class, (0, 0))
            tab[r.object_class] = (s + (r.outcome == "SUCCEEDED"), n + 1)
        return dict(sorted(tab.items()))

    def rate(self, controller="full"):
        tab = self.table(controller)
        n = sum(v[1] for v in tab.values())
        return sum(v[0] for v in tab.values()) / n if n else math.nan

    def trials(self, controller="full"):
        return sum(1 for r in self.records if r.controller == controller)

    def mean_pick_time(self, controller="full"):
        t = [r.pick_time for r in self.records if r.controller == controller and r.outcome == "SUCCEEDED"]
        return float(np.mean(t)) if t else math.nan

    def mean_place_time(self, controller="full"):
        t = [r.place_time for r in self.records if r.controller == controller and r.outcome == "SUCCEEDED"]
        return float(np.mean(t)) if t else math.nan


def _clutter_episode(args):
    episode, n_objects, noise, seed, controllers, cfg = args
    rng = np.random.default_rng([seed, episode])
    scene = sample_scene(n_objects, rng)
    if scene is None:
        return episode, None
    scan_seed = int(rng.integers(2**31))
    out = []
    for c in controllers:
        out.extend(_clear_shelf(c, scene, noise, np.random.default_rng([scan_seed]), cfg, episode))
    return episode, out


def _clear_shelf(controller, scene, noise, rng, cfg, episode):
    """Repeatedly scan and pick the closest visible object until the shelf is empty."""
    camera = Camera(PlanarVec(0.0, 0.0), 0.0)
    remaining = list(scene)
    records = []
    k = 0
    while remaining:
        obj = closest_visible(remaining, camera)
        if obj is None:
            obj = min(remaining, key=lambda o: (o.center.norm(), o.id))
        try:
            scan = synth_scan(obj, camera, SCAN_POINTS, noise, rng, others=remaining)
        except OccludedObject:
            scan = synth_scan(obj, camera, SCAN_POINTS, noise, rng)
        target = extract_target(scan)
        # the hand approaches along the line of sight, stopping short of the shelf
        heading = math.atan2(target.y, target.x)
        start = (target.x - 0.30 * math.cos(heading), target.y - 0.30 * math.sin(heading), heading)
        seed = int(rng.integers(2**31))
        rec = run_trial(controller, remaining, (target.x, target.y), cfg, seed,
                        start_pose=start, grasp_object=obj)
        rec.note = f"episode {episode}; {rec.note}" if rec.note else f"episode {episode}"
        records.append(rec)
        # success or not, the picked object leaves the shelf; a knocked object is replaced as-is
        remaining = [o for o in remaining if o.id != obj.id]
        k += 1
    return records


def run_clutter(n_episodes=20, n_objects=5, noise_sigma=0.010, seed=0, cfg=None,
                controllers=("full", "baseline"), jobs=1):
    """Clutter clearing on random shelves; every controller sees the same scenes and scans."""
    cfg = cfg or ReflexConfig()
    tasks = [(e, n_objects, noise_sigma, seed, tuple(controllers), cfg) for e in range(n_episodes)]
    results = _map(_clutter_episode, tasks, jobs)
    records, skipped = [], 0
    for episode, recs in results:
        if recs is None:
            log.warning("episode %d skipped: scene could not be placed", episode)
            skipped += 1
            continue
        records.extend(recs)
    return ClutterResult(records, n_episodes - skipped, skipped)


def clutter_table_csv(result, controllers=("full", "baseline"), path_or_buf=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["controller", "class", "successes", "trials", "rate"])
    for c in controllers:
        for label, (s, n) in result.table(c).items():
            w.writerow([c, label, s, n, format(s / n, ".4f")])
    return _emit(buf.getvalue(), path_or_buf)


def clutter_summary(result, controllers=("full", "baseline")):
    lines = [f"episodes = {result.episodes_run}", f"episodes_skipped = {result.episodes_skipped}"]
    for c in controllers:
        lines.append(f"{c}_trials = {result.trials(c)}")
        lines.append(f"{c}_success_rate = {result.rate(c):.4f}")
        lines.append(f"{c}_mean_pick_time_s = {result.mean_pick_time(c):.4f}")
        lines.append(f"{c}_mean_place_time_s = {result.mean_place_time(c):.4f}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# contour following


WALL_RADIUS = 50.0


@dataclass
class WallResponse:
    times: np.ndarray
    d_in: np.ndarray
    phases: list

    def settled_within(self, target, tol, after):
        """True when every sample from ``after`` seconds on is within ``tol`` of ``target``."""
        m = self.times >= after
        return bool(np.any(m)) and bool(np.all(np.abs(self.d_in[m] - target) <= tol))


def run_contour_wall(initial_distance=0.08, duration=1.5, cfg=None):
    """Left fingertip approaching along a straight wall that lies on its inward side.

    The wall is the edge of a large static disk, parallel to the approach and
    ``initial_distance`` away along the open tip's inward ray. The right finger
    is mounted far outside the scene so only the left tip interacts; the
    target is out of reach so the hand stays in its approach phase.
    """
    cfg = cfg or ReflexConfig()
    hand = HandGeometry()
    fingers = (default_finger(LEFT), FingerState(side=RIGHT, base_offset=PlanarVec(0.0, 1.0)))
    y_wall = hand.open_y - initial_distance * math.cos(hand.open_heading)
    wall = DiskObject("wall", PlanarVec(0.5, y_wall - WALL_RADIUS), WALL_RADIUS, 1.0, "wall", static=True)
    world = WorldState.create([wall], fingers=fingers)
    ctl = ReflexController((100.0, 0.0), cfg, hand, fingers=fingers)
    world.q[0], world.q[1] = ctl.open_pose()
    lg = EventLog()
    run_episode(world, ctl, (0.0, 0.0), None, cfg, log=lg, max_time=duration)
    k = 2  # index of d_l_in in the proximity vector
    rows = [r for r in lg.rows if r[2] is not None]
    return WallResponse(np.array([r[0] for r in rows]), np.array([r[2][k] for r in rows]),
                        [r[1] for r in rows])


# ----------------------------------------------------------------------------
# throughput


def measure_realtime_factor(duration=5.0, seed=0):
    """Simulated seconds per wall second for the full controller on a single-object scene.

    The trial is repeated until ``duration`` simulated seconds have accumulated.
    """
    obj = DiskObject("cup", PlanarVec(*NOMINAL_TARGET), CUP_RADIUS, 0.2, "cup")
    # warm-up pays for any compilation outside the timed region
    run_trial("full", [obj], NOMINAL_TARGET, seed=seed)
    sim = wall = 0.0
    while sim < duration:
        world = WorldState.create([obj], rng_seed=seed)
        t0 = time.perf_counter()
        run_trial("full", [obj], NOMINAL_TARGET, seed=seed, world=world)
        wall += time.perf_counter() - t0
        sim += world.time
    return sim / wall
