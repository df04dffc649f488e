"""Planar three-joint finger kinematics and the joint-level PD + feedforward law.

Both fingers use the same joint sign convention: positive joint angles rotate
the chain away from the grasp centerline. The right finger is the mirror image
of the left one about the gripper x-axis, so identical joint vectors give
mirror-symmetric poses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import PlanarVec

LEFT = "left"
RIGHT = "right"

JOINT_LIMIT = 2.2
HARD_STOP_STIFFNESS = 10.0


def side_sign(side):
    if side == LEFT:
        return 1.0
    if side == RIGHT:
        return -1.0
    raise ValueError(f"unknown finger side {side!r}")


@dataclass(frozen=True)
class JointGains:
    Kp: tuple = (2.0, 1.5, 1.0)
    Kd: tuple = (0.02, 0.02, 0.02)
    tau_max: float = 1.5

    def __post_init__(self):
        if min(self.Kp) < 0 or min(self.Kd) < 0:
            raise ValueError("joint gains must be non-negative")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be positive")


@dataclass(frozen=True)
class FingerState:
    """Joint state plus the fixed geometry of one finger (gripper frame, SI units).

    ``mount`` is the outward-positive direction of the first link at q = 0.
    """

    q: tuple = (0.0, 0.0, 0.0)
    qd: tuple = (0.0, 0.0, 0.0)
    side: str = LEFT
    base_offset: PlanarVec = field(default_factory=lambda: PlanarVec(0.0, 0.07))
    link_lengths: tuple = (0.06, 0.05, 0.04)
    mount: float = 0.0

    def __post_init__(self):
        side_sign(self.side)
        if len(self.q) != 3 or len(self.qd) != 3 or len(self.link_lengths) != 3:
            raise ValueError("a finger has exactly three joints")
        if min(self.link_lengths) < 0 or sum(self.link_lengths) <= 0:
            raise ValueError("link lengths must be non-negative and not all zero")

    @property
    def sign(self):
        return side_sign(self.side)

    def with_joints(self, q, qd=None):
        return replace(self, q=tuple(float(v) for v in q),
                       qd=self.qd if qd is None else tuple(float(v) for v in qd))


def default_finger(side, **kw):
    """Finger with the standard geometry: base at (0, +-70 mm), links 60/50/40 mm."""
    s = side_sign(side)
    return FingerState(side=side, base_offset=PlanarVec(0.0, 0.07 * s), **kw)


def _chain(f, q=None):
    """Joint positions p0..p3 (gripper frame) and the outward-positive tip angle."""
    s = f.sign
    x, y = f.base_offset.x, f.base_offset.y
    pts = [(x, y)]
    phi = f.mount
    for qi, li in zip(f.q if q is None else q, f.link_lengths):
        phi += qi
        a = s * phi
        x += li * math.cos(a)
        y += li * math.sin(a)
        pts.append((x, y))
    return pts, phi


def forward_kinematics(f):
    """Tip position (gripper frame) and the tip's heading in the gripper frame."""
    pts, phi = _chain(f)
    x, y = pts[-1]
    return PlanarVec(x, y), f.sign * phi


def tip_angle(f):
    """Outward-positive distal heading (mount + sum q); used by the tips trigger."""
    return f.mount + sum(f.q)


def tip_jacobian(f):
    """2x3 Jacobian of the tip position with respect to the joint angles."""
    pts, _ = _chain(f)
    tx, ty = pts[-1]
    s = f.sign
    J = np.empty((2, 3))
    for i in range(3):
        px, py = pts[i]
        J[0, i] = -s * (ty - py)
        J[1, i] = s * (tx - px)
    return J


def tip_kinematics(f, q, qd):
    """Fast path for controllers: (x, y, outward angle, J rows, vx, vy) for joint tuples q, qd."""
    pts, phi = _chain(f, q)
    tx, ty = pts[-1]
    s = f.sign
    j0 = [-s * (ty - pts[i][1]) for i in range(3)]
    j1 = [s * (tx - pts[i][0]) for i in range(3)]
    vx = j0[0] * qd[0] + j0[1] * qd[1] + j0[2] * qd[2]
    vy = j1[0] * qd[0] + j1[1] * qd[1] + j1[2] * qd[2]
    return tx, ty, phi, (j0, j1), vx, vy


def tip_velocity(f):
    J = tip_jacobian(f)
    v = J @ np.asarray(f.qd, dtype=float)
    return PlanarVec(float(v[0]), float(v[1]))


def pd_torque(q_des, qd_des, q, qd, tau_ff, gains):
    """Per-joint PD law with feedforward, saturated at +-tau_max."""
    tau = (np.asarray(gains.Kp, dtype=float) * (np.asarray(q_des, dtype=float) - np.asarray(q, dtype=float))
           + np.asarray(gains.Kd, dtype=float) * (np.asarray(qd_des, dtype=float) - np.asarray(qd, dtype=float))
           + np.asarray(tau_ff, dtype=float))
    return np.clip(tau, -gains.tau_max, gains.tau_max)


def pd_torques(q_des, qd_des, q, qd, tau_ff, gains):
    """Both fingers at once on nested sequences; same law as pd_torque, returns a (2, 3) array.

    Scalar Python arithmetic here is several times faster than numpy on
    three-element vectors, which matters at the control rate.
    """
    Kp, Kd, tmax = gains.Kp, gains.Kd, gains.tau_max
    tau = []
    for f in range(2):
        qdes, qddes, ff, qf, qdf = q_des[f], qd_des[f], tau_ff[f], q[f], qd[f]
        row = []
        for i in range(3):
            v = Kp[i] * (qdes[i] - qf[i]) + Kd[i] * (qddes[i] - qdf[i]) + ff[i]
            row.append(tmax if v > tmax else (-tmax if v < -tmax else v))
        tau.append(row)
    return np.array(tau)


def tip_force_to_torques(f, F_tip):
    J = tip_jacobian(f)
    return J.T @ np.array([F_tip.x, F_tip.y], dtype=float)


def hard_stop_torque(q, limit=JOINT_LIMIT, stiffness=HARD_STOP_STIFFNESS):
    q = np.asarray(q, dtype=float)
    return -stiffness * (np.maximum(q - limit, 0.0) + np.minimum(q + limit, 0.0))


def inverse_kinematics(f, tip, heading_out, elbow=1.0):
    """Joint angles placing the tip at ``tip`` with outward-positive heading ``heading_out``.

    Unreachable targets are projected onto the workspace boundary along the
    base-to-wrist line. Returns ``(q, reachable)``.
    """
    s = f.sign
    l1, l2, l3 = f.link_lengths
    # wrist point in the finger's mirrored frame, relative to its base
    wx = tip.x - l3 * math.cos(heading_out) - f.base_offset.x
    wy = s * (tip.y - f.base_offset.y) - l3 * math.sin(heading_out)
    r2 = wx * wx + wy * wy
    cos_q2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2) if l1 > 0 and l2 > 0 else 1.0
    reachable = -1.0 <= cos_q2 <= 1.0
    cos_q2 = min(1.0, max(-1.0, cos_q2))
    q2 = elbow * math.acos(cos_q2)
    a1 = math.atan2(wy, wx) - math.atan2(l2 * math.sin(q2), l1 + l2 * math.cos(q2))
    q1 = a1 - f.mount
    q3 = heading_out - f.mount - q1 - q2
    q = (wrap_joint(q1), q2, wrap_joint(q3))
    if any(abs(v) > JOINT_LIMIT for v in q):
        reachable = False
    return q, reachable


def wrap_joint(a):
    return math.atan2(math.sin(a), math.cos(a))


def reachable_x(f, x, y, heading_out, span=0.1, step=0.0005):
    """Smallest x' >= x at which the tip can reach (x', y) with the given heading.

    Scans forward in ``step`` increments up to ``span`` and refines the
    workspace edge by bisection. Returns ``x`` when nothing in range is reachable.
    """
    def ok(xx):
        return inverse_kinematics(f, PlanarVec(xx, y), heading_out)[1]

    if ok(x):
        return x
    for k in range(1, int(span / step) + 1):
        if ok(x + k * step):
            lo, hi = x + (k - 1) * step, x + k * step
            for _ in range(30):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
    return x
