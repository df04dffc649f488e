"""Open-loop comparison controller: fixed-width approach, timed close, no sensing."""

from __future__ import annotations

import math
from typing import NamedTuple

from .core import PlanarVec, ReflexConfig
from .fingers import LEFT, RIGHT, default_finger, inverse_kinematics
from .reflex import Commands, GraspPhase, HandGeometry, ZERO3

CLOSE_DURATION = 1.0


class KinematicSnapshot(NamedTuple):
    t: float
    q_l: tuple
    q_r: tuple
    base_pose: tuple


class BaselineState(NamedTuple):
    phase: GraspPhase = GraspPhase.APPROACH
    phase_entry_time: float = 0.0
    grasp_start_time: float = float("nan")


class BaselineController:
    """Holds the fingertips ``object_diameter + clearance_baseline`` apart (surface to
    surface), drives the base to the target, closes along a straight joint-space
    line for ``CLOSE_DURATION`` and hands over to transport without any check.
    """

    name = "baseline"

    def __init__(self, target, object_diameter, cfg=None, hand=None, fingers=None):
        self.cfg = cfg or ReflexConfig()
        self.hand = hand or HandGeometry()
        self.fingers = fingers or (default_finger(LEFT), default_finger(RIGHT))
        self.target = (float(target[0]), float(target[1]))
        self.object_diameter = float(object_diameter)
        self.state = BaselineState()
        x = self.hand.grasp_depth
        r_tip = self.hand.r_tip
        half_open = 0.5 * (self.object_diameter + self.cfg.clearance_baseline) + r_tip
        # symmetric pinch at the centerline: the tips would just touch with no object
        half_pinch = r_tip
        self.q_open = self._pose(x, half_open)
        self.q_pinch = self._pose(x, half_pinch)

    def _pose(self, x, half):
        ql, _ = inverse_kinematics(self.fingers[0], PlanarVec(x, half), 0.0)
        qr, _ = inverse_kinematics(self.fingers[1], PlanarVec(x, -half), 0.0)
        return ql, qr

    def open_pose(self):
        return self.q_open

    @property
    def phase(self):
        return self.state.phase

    def tick(self, snap):
        st = self.state
        t = snap.t
        if st.phase is GraspPhase.APPROACH:
            bx, by, bh = snap.base_pose
            c, s = math.cos(bh), math.sin(bh)
            remaining = c * (self.target[0] - bx) + s * (self.target[1] - by) - self.hand.grasp_depth
            if remaining <= 1e-6:
                self.state = BaselineState(GraspPhase.CLOSING, t, t)
                return Commands(self.q_open, (ZERO3, ZERO3), (ZERO3, ZERO3), 0.0)
            speed = min(self.hand.approach_speed, remaining / self.hand.control_dt)
            return Commands(self.q_open, (ZERO3, ZERO3), (ZERO3, ZERO3), speed)
        if st.phase is GraspPhase.CLOSING:
            s = (t - st.phase_entry_time) / CLOSE_DURATION
            if s >= 1.0:
                self.state = st._replace(phase=GraspPhase.TRANSPORT, phase_entry_time=t)
                return Commands(self.q_pinch, (ZERO3, ZERO3), (ZERO3, ZERO3), 0.0)
            q = tuple(tuple(a + s * (b - a) for a, b in zip(self.q_open[f], self.q_pinch[f]))
                      for f in range(2))
            qd = tuple(tuple((b - a) / CLOSE_DURATION for a, b in zip(self.q_open[f], self.q_pinch[f]))
                       for f in range(2))
            return Commands(q, qd, (ZERO3, ZERO3), 0.0)
        return Commands(self.q_pinch, (ZERO3, ZERO3), (ZERO3, ZERO3), 0.0)


def baseline_tick(snap, state, target, object_diameter, cfg=None):
    """Functional form: (commands, next state) for a kinematic snapshot."""
    ctl = BaselineController(target, object_diameter, cfg)
    ctl.state = state
    cmd = ctl.tick(snap)
    return cmd, ctl.state
