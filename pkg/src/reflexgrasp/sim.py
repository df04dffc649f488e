"""Rate-decoupled trial loop and the per-tick event log.

Physics runs every step (1200 Hz), the controller every ``control_decimation``
steps (300 Hz) and the sensors every ``sensor_decimation`` steps (200 Hz) with
a zero-order hold in between, so a controller tick may see readings that are
up to two physics steps old.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .baseline import BaselineController, KinematicSnapshot
from .core import PlanarVec, ReflexConfig
from .fingers import JointGains, pd_torques
from .reflex import GraspPhase, Observation
from . import _kernels as K
from .sensing import PROXIMITY_FIELDS, ContactReading, SensorHold
from .world import HELD, Stepper, contact_array, SimulationDiverged, tip_world_positions, transport_check

LOG_COLUMNS = (("time", "phase") + PROXIMITY_FIELDS
               + ("fn_left", "fn_right", "tip_l_x", "tip_l_y", "tip_r_x", "tip_r_y",
                  "beta_near", "beta_far", "beta_tips", "beta_occlude", "branch", "objects"))


def _fmt(v):
    return format(v, ".9g")


class EventLog:
    """Append-only per-tick records; serialized to CSV on demand."""

    def __init__(self):
        self.rows = []

    def record(self, world, phase, prox, contacts, triggers, branch):
        tips = tip_world_positions(world)
        objs = "|".join(f"{oid}:{_fmt(world.obj_pos[j, 0])}:{_fmt(world.obj_pos[j, 1])}"
                        for j, oid in enumerate(world.obj_ids))
        self.rows.append((world.time, phase, tuple(prox) if prox is not None else None,
                          contacts, triggers, branch, tips, objs))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for t, phase, prox, contacts, triggers, branch, tips, objs in self.rows:
            prox_cells = [_fmt(v) for v in prox] if prox is not None else [""] * 7
            fn = [_fmt(c.f_normal) for c in contacts] if contacts is not None else ["", ""]
            trig = ([str(int(b)) for b in triggers] if triggers is not None else [""] * 4)
            w.writerow([_fmt(t), phase, *prox_cells, *fn,
                        _fmt(tips[0][0]), _fmt(tips[0][1]), _fmt(tips[1][0]), _fmt(tips[1][1]),
                        *trig, branch, objs])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


@dataclass
class EpisodeResult:
    phase: GraspPhase
    outcome: str  # SUCCEEDED / FAILED / DROPPED
    pick_time: float
    place_time: float
    regrasp_count: int = 0
    branches: list = field(default_factory=list)
    trigger_cause: str = ""
    note: str = ""
    diverged: bool = False
    transport_reason: str = ""


def run_episode(world, controller, place_offset, object_id=None, cfg=None, gains=None,
                rng=None, log=None, max_time=20.0):
    """Run one grasp attempt and, on hand-over, the transport check.

    ``place_offset`` is the carry displacement expressed in the gripper frame at
    hand-over.

    ``controller`` is a ReflexController (reads sensors) or a BaselineController
    (kinematics only). ``world`` is advanced in place.
    """
    cfg = cfg or ReflexConfig()
    gains = gains or JointGains()
    p = world.params
    stepper = Stepper(world)
    sensors = SensorHold(world, rng)
    sensors.refresh()
    sensing = not isinstance(controller, BaselineController)
    ctrl_n = p.control_decimation
    sens_n = p.sensor_decimation
    t0 = world.time
    pick_time = math.nan
    try:
        while True:
            q = world.q.tolist()
            qd = world.qd.tolist()
            pose = tuple(world.base_pose.tolist())
            if sensing:
                prox, c_l, c_r = sensors.read()
                obs = Observation(world.time, prox, c_l, c_r, tuple(q[0]), tuple(qd[0]),
                                  tuple(q[1]), tuple(qd[1]), pose)
            else:
                obs = KinematicSnapshot(world.time, tuple(q[0]), tuple(q[1]), pose)
            cmd = controller.tick(obs)
            phase = controller.phase
            if log is not None:
                if sensing:
                    st = controller.state
                    log.record(world, phase.value, prox, (c_l, c_r), st.triggers, st.branch)
                else:
                    log.record(world, phase.value, None, None, None, "")
            if phase is GraspPhase.TRANSPORT:
                pick_time = world.time - t0
                break
            if phase is GraspPhase.FAILED or world.time - t0 > max_time:
                return _finish(controller, GraspPhase.FAILED, "FAILED", world.time - t0, 0.0)
            h = pose[2]
            world.set_base_velocity(cmd.base_speed * math.cos(h), cmd.base_speed * math.sin(h))
            tau = pd_torques(cmd.q_des, cmd.qd_des, q, qd, cmd.tau_ff, gains)
            target = world.steps + ctrl_n
            while world.steps < target:
                nxt = (world.steps // sens_n + 1) * sens_n
                n = min(target, nxt) - world.steps
                stepper.advance(tau, n)
                if world.steps % sens_n == 0:
                    sensors.refresh()
        world.set_base_velocity(0.0, 0.0)

        def on_tick(w):
            if log is not None:
                log.record(w, GraspPhase.TRANSPORT.value, None, _tip_forces(w), None, "")

        bx, by, bh = world.base_pose.tolist()
        c, s = math.cos(bh), math.sin(bh)
        place = PlanarVec(bx + c * place_offset[0] - s * place_offset[1],
                          by + s * place_offset[0] + c * place_offset[1])
        res = transport_check(world, place, hold_q=cmd.q_des, object_id=object_id,
                              tau_ff=cmd.tau_ff, gains=gains, cfg=cfg, on_tick=on_tick)
    except SimulationDiverged as exc:
        r = _finish(controller, GraspPhase.FAILED, "FAILED", world.time - t0, 0.0)
        r.diverged = True
        r.note = str(exc)
        return r
    if res.verdict == HELD:
        out = _finish(controller, GraspPhase.SUCCEEDED, "SUCCEEDED", pick_time, res.duration)
    else:
        # nothing in hand at hand-over is a failed grasp; losing it on the way is a drop
        outcome = "DROPPED" if res.duration > 0 else "FAILED"
        out = _finish(controller, GraspPhase.FAILED, outcome, pick_time, res.duration)
    out.transport_reason = res.reason
    return out


def _tip_forces(world):
    """Largest normal force on each fingertip, as contact readings for the log."""
    fn = [0.0, 0.0]
    for row in contact_array(world):
        b = int(row[K.C_BODY])
        if b < 2 and row[K.C_FN] > fn[b]:
            fn[b] = float(row[K.C_FN])
    return tuple(ContactReading(f > 0.0, 0.0, f, 0.0) for f in fn)


def _finish(controller, phase, outcome, pick_time, place_time):
    st = controller.state
    if hasattr(controller, "state") and hasattr(st, "regrasp_count"):
        return EpisodeResult(phase, outcome, pick_time, place_time, st.regrasp_count,
                             list(st.branches), st.trigger_cause, st.note)
    return EpisodeResult(phase, outcome, pick_time, place_time)
