"""Reflexive grasping controller.

The controller closes its loop on fingertip/palm proximity and fingertip
contact readings. While the base approaches the target the fingertips ride on
virtual potential fields (collision avoidance outward/forward, two-sided
contour following inward). Grasp attempts are triggered early by proximity
or tip-angle predicates, evaluated by a stillness/force/palm-visibility test
and, when they fail, repaired by one of three re-grasp trajectories planned
from a circle fitted to the two fingertip contacts.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .core import GripperFrame, PlanarVec, ReflexConfig, world_to_gripper
from .fingers import LEFT, RIGHT, default_finger, inverse_kinematics, reachable_x, tip_kinematics
from .sensing import D_MAX, ContactReading, ProximityVector, tip_directions


class NoEstimate(ValueError):
    """Raised when the two-contact circle fit is impossible (a tip is not touching)."""


class GraspPhase(str, Enum):
    APPROACH = "APPROACH"
    CLOSING = "CLOSING"
    EVALUATE = "EVALUATE"
    REGRASP_PINCH_PULL = "REGRASP_PINCH_PULL"
    REGRASP_ANTIPODAL = "REGRASP_ANTIPODAL"
    REGRASP_POWER_WRAP = "REGRASP_POWER_WRAP"
    TRANSPORT = "TRANSPORT"
    SUCCEEDED = "SUCCEEDED"
    FAILED = "FAILED"


PINCH_PULL = GraspPhase.REGRASP_PINCH_PULL
ANTIPODAL = GraspPhase.REGRASP_ANTIPODAL
POWER_WRAP = GraspPhase.REGRASP_POWER_WRAP
REGRASP_PHASES = (PINCH_PULL, ANTIPODAL, POWER_WRAP)
TERMINAL_PHASES = (GraspPhase.SUCCEEDED, GraspPhase.FAILED)


class TriggerFlags(NamedTuple):
    beta_near: bool = False
    beta_far: bool = False
    beta_tips: bool = False
    beta_occlude: bool = False


@dataclass(frozen=True)
class ObjectEstimate:
    center: PlanarVec
    radius: float


@dataclass(frozen=True)
class HandGeometry:
    """Controller-side poses and motion limits (gripper frame, SI units)."""

    grasp_depth: float = 0.085
    open_x: float = 0.115
    open_y: float = 0.065
    open_heading: float = 0.9
    close_heading: float = 0.0
    wrap_heading: float = -0.5
    r_tip: float = 0.012
    admittance: float = 2.0
    max_offset: float = 0.04
    relax_time: float = 0.3
    close_speed: float = 0.12
    heading_rate: float = 3.0
    squeeze_force: float = 1.5
    force_gain: float = 0.02  # m/s per N
    hold_fraction: float = 0.8
    slip_out_angle: float = 0.44  # rad; contact this far ahead of the tip ends a squeeze
    inner_limit: float = -0.005
    settle_time: float = 0.1
    stall_speed: float = 0.02
    min_close_time: float = 0.15
    max_close_time: float = 1.0
    waypoint_speed: float = 0.25
    regrasp_clearance: float = 0.015
    squeeze_depth: float = 0.008
    palm_clearance: float = 0.01
    approach_speed: float = 0.15
    control_dt: float = 4.0 / 1200.0


# ----------------------------------------------------------------------------
# reflex primitives


def potential_field_force(tip, d, cfg, tip_heading):
    """Net virtual force on one fingertip, in the gripper frame.

    ``tip_heading`` is the tip's heading in the gripper frame; the sensing
    directions are derived from it. Each direction contributes only while its
    reading is below the activation threshold.
    """
    d_out, d_fwd, d_in = d.tip(tip)
    e_out, e_fwd, e_in = tip_directions(tip_heading, tip)
    fx = fy = 0.0
    if d_out < cfg.d_thresh_out:
        m = cfg.K_out * (d_out - cfg.d_thresh_out)
        fx += m * e_out[0]
        fy += m * e_out[1]
    if d_fwd < cfg.d_thresh_forward:
        m = cfg.K_forward * (d_fwd - cfg.d_thresh_forward)
        fx += m * e_fwd[0]
        fy += m * e_fwd[1]
    if d_in < cfg.d_thresh_in:
        m = cfg.K_in * (d_in - cfg.d_des_in)
        fx += m * e_in[0]
        fy += m * e_in[1]
    return PlanarVec(fx, fy)


def evaluate_triggers(d, left_tip_angle, right_tip_angle, cfg):
    """Early-grasp predicates. Tip angles are outward-positive distal headings."""
    return TriggerFlags(
        beta_near=d.d_palm < cfg.d_near,
        beta_far=d.d_palm < cfg.d_far,
        beta_tips=(left_tip_angle < cfg.theta_close) and (right_tip_angle < cfg.theta_close),
        beta_occlude=(d.d_l_forward < cfg.d_occlude) or (d.d_r_forward < cfg.d_occlude),
    )


def evaluate_success(left, right, v_l_tip, v_r_tip, d, cfg):
    return (v_l_tip < cfg.gamma_v and v_r_tip < cfg.gamma_v
            and abs(left.f_normal) > cfg.gamma_F and abs(right.f_normal) > cfg.gamma_F
            and d.d_palm < cfg.d_far)


def estimate_object(p_l, n_l, p_r, n_r):
    """Circle through two contacts with known inward normals (gripper frame).

    Minimizes sum ||(c - p_i) - r n_i||^2 over centre c and radius r. For two
    contacts the optimum sets c to the midpoint of p_i + r n_i and
    r = (p_r - p_l).(n_l - n_r) / ||n_l - n_r||^2.
    """
    dnx, dny = n_l.x - n_r.x, n_l.y - n_r.y
    den = dnx * dnx + dny * dny
    if den < 1e-12:
        raise NoEstimate("contact normals are parallel")
    r = ((p_r.x - p_l.x) * dnx + (p_r.y - p_l.y) * dny) / den
    if not r > 0:
        raise NoEstimate(f"fitted radius is not positive ({r:.4g})")
    cx = 0.5 * (p_l.x + p_r.x + r * (n_l.x + n_r.x))
    cy = 0.5 * (p_l.y + p_r.y + r * (n_l.y + n_r.y))
    return ObjectEstimate(PlanarVec(cx, cy), r)


def contact_geometry(reading, tip_x, tip_y, tip_heading, r_tip):
    """Contact point and inward normal (tip -> object) in the gripper frame."""
    a = tip_heading + reading.theta
    n = PlanarVec(math.cos(a), math.sin(a))
    return PlanarVec(tip_x + r_tip * n.x, tip_y + r_tip * n.y), n


def select_branch(x_obj, x_l_tip, x_r_tip, r_obj, cfg):
    if x_obj > x_l_tip and x_obj > x_r_tip:
        return PINCH_PULL
    if x_obj < x_l_tip and x_obj < x_r_tip and r_obj < cfg.r_power:
        return ANTIPODAL
    return POWER_WRAP


DEFAULT_RADIUS = 0.03


class Segment(NamedTuple):
    kind: str  # "move", "advance", "pull" or "squeeze"
    left: tuple = None  # (x, y, outward heading)
    right: tuple = None


def plan_regrasp(est, x_l_tip, x_r_tip, cfg, hand=None, tips=None, palm_range=None):
    """Pick the re-grasp branch and its fingertip waypoints.

    ``tips`` are the current (x, y, outward heading) tip set-points used as the
    start of the trajectory; without them the tips are assumed at their x with
    y on the estimate's rim. With ``est`` None the power wrap is planned
    around a default-sized object, placed ``palm_range`` ahead of the palm
    when the palm ray sees something and at the grasp depth otherwise.
    """
    hand = hand or HandGeometry()
    if est is None:
        est = ObjectEstimate(PlanarVec(hand.grasp_depth if palm_range is None else palm_range + DEFAULT_RADIUS, 0.0),
                             DEFAULT_RADIUS)
        branch = POWER_WRAP
    else:
        branch = select_branch(est.center.x, x_l_tip, x_r_tip, est.radius, cfg)
    xo, yo, r = est.center.x, est.center.y, est.radius
    R = r + hand.r_tip
    wide = R + hand.regrasp_clearance
    grip = R - hand.squeeze_depth
    if tips is None:
        tips = ((x_l_tip, yo + R, hand.close_heading), (x_r_tip, yo - R, hand.close_heading))
    (xl, _, hl), (xr, _, hr) = tips
    h = hand.close_heading

    def pair(x, half, heading=h):
        return (x, yo + half, heading), (x, yo - half, heading)

    segs = [Segment("move", (xl, yo + wide, hl), (xr, yo - wide, hr))]
    if branch is PINCH_PULL:
        x_new = max(cfg.d_des_in, r + hand.palm_clearance)
        # an object beyond the open-pose tips is out of reach: drive the base up first
        adv = xo - hand.open_x
        if adv > 0.0:
            segs.append(Segment("advance", (adv, 0.0, 0.0), (adv, 0.0, 0.0)))
            xo -= adv
        segs += [Segment("move", *pair(xo, wide)),
                 Segment("move", *pair(xo, grip)),
                 Segment("pull", *pair(x_new, grip)),
                 Segment("move", *pair(x_new, wide)),
                 Segment("squeeze", *pair(x_new, wide))]
    elif branch is ANTIPODAL:
        segs += [Segment("move", *pair(xo, wide)),
                 Segment("squeeze", *pair(xo, wide))]
    else:
        x_hook = xo + 0.5 * R
        hw = hand.wrap_heading
        segs += [Segment("move", *pair(x_hook, wide)),
                 Segment("move", *pair(x_hook, 0.6 * R, hw)),
                 Segment("squeeze", *pair(x_hook, 0.6 * R, hw))]
    return branch, segs


def antipodal_ok(n_l, n_r, gamma_a):
    """Contact normals opposed within gamma_a."""
    c = -(n_l.x * n_r.x + n_l.y * n_r.y)
    return math.acos(max(-1.0, min(1.0, c))) <= gamma_a


# ----------------------------------------------------------------------------
# controller


class Observation(NamedTuple):
    t: float
    prox: ProximityVector
    contact_l: ContactReading
    contact_r: ContactReading
    q_l: tuple
    qd_l: tuple
    q_r: tuple
    qd_r: tuple
    base_pose: tuple  # world (x, y, heading)


class Commands(NamedTuple):
    q_des: tuple  # ((3), (3))
    qd_des: tuple
    tau_ff: tuple
    base_speed: float  # along gripper +x


ZERO3 = (0.0, 0.0, 0.0)


@dataclass
class ReflexState:
    target: tuple  # world (x, y) of the object to grasp
    regrasp_enabled: bool = True
    phase: GraspPhase = GraspPhase.APPROACH
    phase_entry_time: float = 0.0
    grasp_start_time: float = math.nan
    offsets: list = field(default_factory=lambda: [[0.0, 0.0], [0.0, 0.0]])
    setpoints: list = None  # per tip [x, y, outward heading]
    q_cmd: tuple = None
    qd_cmd: tuple = (ZERO3, ZERO3)
    tau_ff: tuple = (ZERO3, ZERO3)
    settle_since: float = math.nan
    stall_since: float = math.nan
    segments: list = field(default_factory=list)
    seg_index: int = 0
    seg_t0: float = 0.0
    seg_q0: tuple = None
    seg_q1: tuple = None
    seg_T: float = 0.0
    branch: str = ""
    branches: list = field(default_factory=list)
    regrasp_count: int = 0
    estimate: ObjectEstimate = None
    pinch_check: bool = False
    slipping: bool = False
    pull_x: float = 0.0
    seg_base0: tuple = (0.0, 0.0, 0.0)
    squeeze_center: float = 0.0
    triggers: TriggerFlags = TriggerFlags()
    trigger_cause: str = ""
    note: str = ""


class ReflexController:
    """Full-reflex controller; ``regrasp=False`` gives the partial-reflex variant."""

    name = "full"

    def __init__(self, target, cfg=None, hand=None, regrasp=True, fingers=None):
        self.cfg = cfg or ReflexConfig()
        self.hand = hand or HandGeometry()
        self.fingers = fingers or (default_finger(LEFT), default_finger(RIGHT))
        self.state = ReflexState(target=(float(target[0]), float(target[1])), regrasp_enabled=regrasp)
        if not regrasp:
            self.name = "partial"
        self._open = (self._ik(0, self.hand.open_x, self.hand.open_y, self.hand.open_heading),
                      self._ik(1, self.hand.open_x, -self.hand.open_y, self.hand.open_heading))

    # -- helpers ------------------------------------------------------------

    def open_pose(self):
        """Joint vectors of the nominal open hand."""
        return self._open

    def _ik(self, f, x, y, heading):
        q, _ = inverse_kinematics(self.fingers[f], PlanarVec(x, y), heading)
        return q

    def _side_y(self, f, y):
        """Signed y: positive means away from the squeeze line for finger f."""
        y = y - self.state.squeeze_center
        return y if f == 0 else -y

    def _from_side_y(self, f, yy):
        return self.state.squeeze_center + (yy if f == 0 else -yy)

    @property
    def phase(self):
        return self.state.phase

    def _enter(self, phase, t):
        st = self.state
        st.phase = phase
        st.phase_entry_time = t
        st.settle_since = math.nan
        st.stall_since = math.nan

    # -- main transition ----------------------------------------------------

    def tick(self, obs):
        st = self.state
        cfg = self.cfg
        t = obs.t
        kin = (tip_kinematics(self.fingers[0], obs.q_l, obs.qd_l),
               tip_kinematics(self.fingers[1], obs.q_r, obs.qd_r))
        st.triggers = evaluate_triggers(obs.prox, kin[0][2], kin[1][2], cfg)
        st.note = ""
        if st.q_cmd is None:
            st.q_cmd = (tuple(obs.q_l), tuple(obs.q_r))
        if st.phase in (GraspPhase.CLOSING, GraspPhase.EVALUATE) or st.phase in REGRASP_PHASES:
            if t - st.grasp_start_time > cfg.t_fail:
                self._enter(GraspPhase.FAILED, t)
                st.note = "timeout"
                return self._hold()
        phase = st.phase
        if phase is GraspPhase.APPROACH:
            return self._approach(obs, kin)
        if phase is GraspPhase.CLOSING:
            return self._closing(obs, kin)
        if phase is GraspPhase.EVALUATE:
            return self._evaluate(obs, kin)
        if phase in REGRASP_PHASES:
            return self._regrasp(obs, kin)
        return self._hold()

    def _hold(self):
        st = self.state
        return Commands(st.q_cmd, (ZERO3, ZERO3), st.tau_ff, 0.0)

    def _approach(self, obs, kin):
        st, cfg, hand = self.state, self.cfg, self.hand
        bx, by, bh = obs.base_pose
        c, s = math.cos(bh), math.sin(bh)
        tx, ty = st.target[0] - bx, st.target[1] - by
        remaining = (c * tx + s * ty) - hand.grasp_depth
        reached = remaining <= 1e-6
        tr = st.triggers
        cause = ""
        if tr.beta_near:
            cause = "near"
        elif tr.beta_far and tr.beta_tips:
            cause = "far+tips"
        elif tr.beta_occlude:
            cause = "occlude"
        elif reached:
            cause = "target"
        dt = hand.control_dt
        q_cmd = []
        tau_ff = []
        setpoints = []
        for f in range(2):
            x, y, ang, J, _, _ = kin[f]
            side = LEFT if f == 0 else RIGHT
            heading = ang if f == 0 else -ang
            F = potential_field_force(side, obs.prox, cfg, heading)
            off = st.offsets[f]
            if F.x != 0.0 or F.y != 0.0:
                off[0] += F.x / hand.admittance * dt
                off[1] += F.y / hand.admittance * dt
                n = math.hypot(off[0], off[1])
                if n > hand.max_offset:
                    off[0] *= hand.max_offset / n
                    off[1] *= hand.max_offset / n
            else:
                k = min(1.0, dt / hand.relax_time)
                off[0] -= k * off[0]
                off[1] -= k * off[1]
            oy = hand.open_y if f == 0 else -hand.open_y
            sp = [hand.open_x + off[0], oy + off[1], hand.open_heading]
            setpoints.append(sp)
            q_cmd.append(self._ik(f, sp[0], sp[1], sp[2]))
            tau_ff.append(tuple(J[0][i] * F.x + J[1][i] * F.y for i in range(3)))
        st.setpoints = setpoints
        st.q_cmd = tuple(q_cmd)
        st.tau_ff = tuple(tau_ff)
        if cause:
            st.trigger_cause = cause
            st.grasp_start_time = obs.t
            self._start_closing(obs.t)
            return Commands(st.q_cmd, (ZERO3, ZERO3), st.tau_ff, 0.0)
        speed = min(hand.approach_speed, max(remaining, 0.0) / dt)
        return Commands(st.q_cmd, (ZERO3, ZERO3), st.tau_ff, speed)

    def _start_closing(self, t):
        st = self.state
        st.tau_ff = (ZERO3, ZERO3)
        st.setpoints = [list(sp) for sp in st.setpoints]
        st.squeeze_center = 0.0
        self._enter(GraspPhase.CLOSING, t)

    def _squeeze_step(self, obs, kin, heading_goal, x_goal=None):
        """Advance both set-points toward the centerline with force regulation.

        With ``x_goal`` the set-points also slide along x toward it at the
        closing speed.

        Returns True when the squeeze has settled (success held or tips stalled).
        """
        st, cfg, hand = self.state, self.cfg, self.hand
        dt = hand.control_dt
        contacts = (obs.contact_l, obs.contact_r)
        q_cmd = []
        at_limit = True
        st.slipping = False
        for f in range(2):
            sp = st.setpoints[f]
            if contacts[f].in_contact:
                # in contact: set-point speed proportional to the force error
                rate = hand.force_gain * (hand.squeeze_force - contacts[f].f_normal)
                rate = max(-hand.close_speed, min(hand.close_speed, rate))
            else:
                rate = hand.close_speed
            yy = self._side_y(f, sp[1]) - rate * dt
            if yy < hand.inner_limit:
                yy = hand.inner_limit
            else:
                at_limit = False
            sp[1] = self._from_side_y(f, yy)
            dh = heading_goal - sp[2]
            step = hand.heading_rate * dt
            sp[2] += max(-step, min(step, dh))
            if x_goal is not None:
                step = hand.close_speed * dt
                sp[0] += max(-step, min(step, x_goal - sp[0]))
            q_cmd.append(self._ik(f, sp[0], sp[1], sp[2]))
        st.q_cmd = tuple(q_cmd)
        t = obs.t
        v_l = math.hypot(kin[0][4], kin[0][5])
        v_r = math.hypot(kin[1][4], kin[1][5])
        if contacts[0].in_contact and contacts[1].in_contact:
            # squeezing behind the equator would push the object out of the hand
            lim = math.sin(hand.slip_out_angle)
            for f in range(2):
                a = (kin[f][2] if f == 0 else -kin[f][2]) + contacts[f].theta
                if math.cos(a) > lim:
                    st.note = "slip-out"
                    st.slipping = True
                    return True
        # settle on a firm grip: the success predicate plus most of the squeeze force
        firm = min(contacts[0].f_normal if contacts[0].in_contact else 0.0,
                   contacts[1].f_normal if contacts[1].in_contact else 0.0) >= hand.hold_fraction * hand.squeeze_force
        if firm and evaluate_success(obs.contact_l, obs.contact_r, v_l, v_r, obs.prox, cfg):
            if math.isnan(st.settle_since):
                st.settle_since = t
            if t - st.settle_since >= hand.settle_time:
                return True
        else:
            st.settle_since = math.nan
        elapsed = t - st.phase_entry_time if st.phase is GraspPhase.CLOSING else t - st.seg_t0
        # closed on nothing: both set-points at the inner limit and the tips at rest
        if at_limit and max(v_l, v_r) < hand.stall_speed and elapsed >= hand.min_close_time:
            if math.isnan(st.stall_since):
                st.stall_since = t
            if t - st.stall_since >= hand.settle_time:
                return True
        else:
            st.stall_since = math.nan
        return elapsed >= hand.max_close_time

    def _closing(self, obs, kin):
        hand = self.hand
        # close on the expected centre line, pulled in when the palm sees the object early
        x_goal = hand.grasp_depth
        if obs.prox.d_palm < D_MAX:
            x_goal = min(x_goal, obs.prox.d_palm + DEFAULT_RADIUS)
        if self._squeeze_step(obs, kin, hand.close_heading, x_goal):
            self._enter(GraspPhase.EVALUATE, obs.t)
        return self._hold()

    def _evaluate(self, obs, kin):
        st, cfg, hand = self.state, self.cfg, self.hand
        t = obs.t
        v_l = math.hypot(kin[0][4], kin[0][5])
        v_r = math.hypot(kin[1][4], kin[1][5])
        # a squeeze cut short by slipping contacts never counts as a grasp
        ok = not st.slipping and evaluate_success(obs.contact_l, obs.contact_r, v_l, v_r, obs.prox, cfg)
        geo = None
        if obs.contact_l.in_contact and obs.contact_r.in_contact:
            geo = (contact_geometry(obs.contact_l, kin[0][0], kin[0][1], kin[0][2], hand.r_tip),
                   contact_geometry(obs.contact_r, kin[1][0], kin[1][1], -kin[1][2], hand.r_tip))
        if ok and st.pinch_check and cfg.antipodal_check:
            if geo is None or not antipodal_ok(geo[0][1], geo[1][1], cfg.gamma_a):
                ok = False
                st.note = "not antipodal"
        if ok:
            self._enter(GraspPhase.TRANSPORT, t)
            return self._hold()
        if not st.regrasp_enabled:
            self._enter(GraspPhase.FAILED, t)
            st.note = st.note or "grasp not secure"
            return self._hold()
        est = None
        if geo is not None:
            try:
                est = estimate_object(geo[0][0], geo[0][1], geo[1][0], geo[1][1])
            except NoEstimate:
                est = None
        palm = obs.prox.d_palm if obs.prox.d_palm < D_MAX else None
        if est is None and palm is not None:
            # no usable contacts: place a default-sized disk where the palm ray hits
            est = ObjectEstimate(PlanarVec(palm + DEFAULT_RADIUS, st.squeeze_center), DEFAULT_RADIUS)
        st.estimate = est
        tips = tuple((sp[0], sp[1], sp[2]) for sp in st.setpoints)
        branch, segs = plan_regrasp(est, kin[0][0], kin[1][0], cfg, hand, tips=tips, palm_range=palm)
        st.branch = branch.value
        st.branches.append(branch.value)
        st.regrasp_count += 1
        st.pinch_check = branch in (PINCH_PULL, ANTIPODAL)
        st.squeeze_center = est.center.y if est is not None else 0.0
        st.segments = segs
        st.seg_index = -1
        self._enter(branch, t)
        self._next_segment(obs)
        return self._hold()

    def _next_segment(self, obs):
        st, hand = self.state, self.hand
        st.seg_index += 1
        st.seg_t0 = obs.t
        st.settle_since = math.nan
        st.stall_since = math.nan
        if st.seg_index >= len(st.segments):
            self._enter(GraspPhase.EVALUATE, obs.t)
            return
        seg = st.segments[st.seg_index]
        if seg.kind == "squeeze":
            return
        if seg.kind == "advance":
            st.seg_base0 = obs.base_pose
            return
        if seg.kind == "pull":
            # force-regulated slide toward the palm, stopping at the workspace edge
            x = seg.left[0]
            st.pull_x = max(reachable_x(self.fingers[0], x, st.setpoints[0][1], seg.left[2]),
                            reachable_x(self.fingers[1], x, st.setpoints[1][1], seg.right[2]))
            return
        goals = (seg.left, seg.right)
        st.seg_q0 = st.q_cmd
        st.seg_q1 = tuple(self._ik(f, *goals[f]) for f in range(2))
        dist = max(math.hypot(goals[f][0] - st.setpoints[f][0], goals[f][1] - st.setpoints[f][1])
                   for f in range(2))
        st.seg_T = max(dist / hand.waypoint_speed, hand.control_dt)
        st.setpoints = [list(g) for g in goals]

    def _stop_short(self, obs, kin):
        """Re-aim the rest of the plan when the pull could not bring the object in.

        A pull toward the palm can end early at the edge of the finger
        workspace. When the contacts then place the object's centre clearly
        ahead of the tips, the remaining waypoints move forward to the
        nearest reachable pose at that centre so the final pinch lands on
        the equator rather than behind it.
        """
        st, hand = self.state, self.hand
        if not (obs.contact_l.in_contact and obs.contact_r.in_contact):
            return
        gl = contact_geometry(obs.contact_l, kin[0][0], kin[0][1], kin[0][2], hand.r_tip)
        gr = contact_geometry(obs.contact_r, kin[1][0], kin[1][1], -kin[1][2], hand.r_tip)
        try:
            est = estimate_object(gl[0], gl[1], gr[0], gr[1])
        except NoEstimate:
            return
        x_tips = 0.5 * (kin[0][0] + kin[1][0])
        if est.center.x <= x_tips:
            return
        moved = []
        for seg in st.segments[st.seg_index + 1:]:
            (xl, yl, hl), (xr, yr, hr) = seg.left, seg.right
            if seg.kind == "move":
                # reopen with the tips turned outward, which reaches closer to the palm
                hl = hr = hand.open_heading
            x = max(xl, xr, est.center.x)
            x = max(reachable_x(self.fingers[0], x, yl, hl), reachable_x(self.fingers[1], x, yr, hr))
            moved.append(seg._replace(left=(x, yl, hl), right=(x, yr, hr)))
        st.segments = st.segments[:st.seg_index + 1] + moved

    def _regrasp(self, obs, kin):
        st = self.state
        seg = st.segments[st.seg_index]
        if seg.kind == "squeeze":
            if self._squeeze_step(obs, kin, seg.left[2]):
                self._next_segment(obs)
            return self._hold()
        if seg.kind == "advance":
            bx, by, bh = obs.base_pose
            x0, y0, _ = st.seg_base0
            left = seg.left[0] - (math.cos(bh) * (bx - x0) + math.sin(bh) * (by - y0))
            if left <= 1e-6:
                self._next_segment(obs)
                return self._hold()
            speed = min(self.hand.approach_speed, left / self.hand.control_dt)
            return Commands(st.q_cmd, (ZERO3, ZERO3), st.tau_ff, speed)
        if seg.kind == "pull":
            self._squeeze_step(obs, kin, seg.left[2], st.pull_x)
            arrived = all(abs(sp[0] - st.pull_x) < 1e-6 for sp in st.setpoints)
            still = max(math.hypot(kin[0][4], kin[0][5]), math.hypot(kin[1][4], kin[1][5])) < self.hand.stall_speed
            if (arrived and still) or obs.t - st.seg_t0 > self.hand.max_close_time:
                self._stop_short(obs, kin)
                self._next_segment(obs)
            return self._hold()
        s = (obs.t - st.seg_t0) / st.seg_T
        if s >= 1.0:
            st.q_cmd = st.seg_q1
            st.qd_cmd = (ZERO3, ZERO3)
            self._next_segment(obs)
            return self._hold()
        q0, q1 = st.seg_q0, st.seg_q1
        st.q_cmd = tuple(tuple(a + s * (b - a) for a, b in zip(q0[f], q1[f])) for f in range(2))
        qd = tuple(tuple((b - a) / st.seg_T for a, b in zip(q0[f], q1[f])) for f in range(2))
        return Commands(st.q_cmd, qd, st.tau_ff, 0.0)


def reflex_tick(obs, state, cfg=None, hand=None):
    """Functional form of one controller tick: returns (commands, next state).

    The input state is not modified.
    """
    ctl = ReflexController.__new__(ReflexController)
    ctl.cfg = cfg or ReflexConfig()
    ctl.hand = hand or HandGeometry()
    ctl.fingers = (default_finger(LEFT), default_finger(RIGHT))
    ctl.state = copy.deepcopy(state)
    ctl.name = "full" if state.regrasp_enabled else "partial"
    ctl._open = (ctl._ik(0, ctl.hand.open_x, ctl.hand.open_y, ctl.hand.open_heading),
                 ctl._ik(1, ctl.hand.open_x, -ctl.hand.open_y, ctl.hand.open_heading))
    cmd = ctl.tick(obs)
    return cmd, ctl.state


def target_in_gripper(target, base_pose):
    frame = GripperFrame(PlanarVec(base_pose[0], base_pose[1]), base_pose[2])
    return world_to_gripper(PlanarVec(*target), frame)
