"""Fixed-timestep planar physics for disks, two fingertips and a kinematic gripper base.

Only the fingertips (disks of radius ``r_tip``), the palm plate and the objects
collide; finger links pass through objects. Contacts use a penalty spring
with damping and regularized Coulomb friction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from . import _kernels as K
from .core import DiskObject, GripperFrame, PlanarVec, ReflexConfig, world_to_gripper
from .fingers import JOINT_LIMIT, HARD_STOP_STIFFNESS, LEFT, RIGHT, FingerState, JointGains, default_finger, pd_torques

DT = 1.0 / 1200.0
MAX_CONTACT_ROWS = 64


class SimulationDiverged(RuntimeError):
    def __init__(self, component):
        super().__init__(f"simulation diverged: non-finite value in {component}")
        self.component = component


@dataclass(frozen=True)
class SimParams:
    r_tip: float = 0.012
    k_contact: float = 2000.0
    b_contact: float = 20.0
    mu: float = 0.6
    b_tangent: float = 40.0
    k_tangent: float = 400.0
    ground_decel: float = 0.5
    v_max: float = 2.0
    palm_x: float = 0.0
    palm_half_width: float = 0.05
    palm_radius: float = 0.005
    joint_limit: float = JOINT_LIMIT
    hard_stop_k: float = HARD_STOP_STIFFNESS
    joint_inertia: tuple = (2e-3, 1e-3, 5e-4)
    joint_damping: tuple = (0.03, 0.015, 0.005)
    dt: float = DT
    control_decimation: int = 4
    sensor_decimation: int = 6
    approach_speed: float = 0.15
    transport_speed: float = 0.2
    d_max: float = 0.20
    sigma_force: float = 0.02
    sigma_theta: float = 0.01
    sensor_noise: bool = False

    def as_array(self):
        return np.array([self.r_tip, self.k_contact, self.b_contact, self.mu, self.b_tangent,
                         self.ground_decel, self.v_max, self.palm_x, self.palm_half_width,
                         self.palm_radius, self.joint_limit, self.hard_stop_k, self.k_tangent])


@dataclass
class WorldState:
    """Mutable simulation state. Arrays are owned by the state; use ``copy()`` to fork."""

    time: float
    obj_ids: list
    obj_labels: list
    obj_pos: np.ndarray
    obj_vel: np.ndarray
    obj_radius: np.ndarray
    obj_mass: np.ndarray
    obj_static: np.ndarray
    base_pose: np.ndarray
    base_vel: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    finger_base: np.ndarray
    link_lengths: np.ndarray
    mount: np.ndarray
    anchor: np.ndarray = None  # friction anchors (3 + n_obj, n_obj)
    rng_seed: int = 0
    steps: int = 0
    params: SimParams = field(default_factory=SimParams)

    @classmethod
    def create(cls, objects=(), gripper=None, q_left=(0.0, 0.0, 0.0), q_right=(0.0, 0.0, 0.0),
               rng_seed=0, params=None, fingers=None):
        params = params or SimParams()
        gripper = gripper or GripperFrame(PlanarVec(0.0, 0.0), 0.0)
        if fingers is None:
            fingers = (default_finger(LEFT), default_finger(RIGHT))
        objects = list(objects)
        n = len(objects)
        return cls(
            time=0.0,
            obj_ids=[o.id for o in objects],
            obj_labels=[o.class_label for o in objects],
            obj_pos=np.array([[o.center.x, o.center.y] for o in objects], dtype=float).reshape(n, 2),
            obj_vel=np.zeros((n, 2)),
            obj_radius=np.array([o.radius for o in objects], dtype=float),
            obj_mass=np.array([o.mass for o in objects], dtype=float),
            obj_static=np.array([o.static for o in objects], dtype=np.bool_),
            base_pose=np.array([gripper.origin.x, gripper.origin.y, gripper.heading], dtype=float),
            base_vel=np.zeros(3),
            q=np.array([q_left, q_right], dtype=float),
            qd=np.zeros((2, 3)),
            finger_base=np.array([[f.base_offset.x, f.base_offset.y] for f in fingers], dtype=float),
            link_lengths=np.array([f.link_lengths for f in fingers], dtype=float),
            mount=np.array([f.mount for f in fingers], dtype=float),
            anchor=np.zeros((3 + n, n)),
            rng_seed=int(rng_seed),
            params=params,
        )

    def copy(self):
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v = v.copy()
            elif isinstance(v, list):
                v = list(v)
            kw[f.name] = v
        return WorldState(**kw)

    @property
    def signs(self):
        return _SIGNS

    @property
    def gripper(self):
        return GripperFrame(PlanarVec(float(self.base_pose[0]), float(self.base_pose[1])),
                            float(self.base_pose[2]))

    def finger(self, side):
        i = 0 if side == LEFT else 1
        return FingerState(q=tuple(self.q[i]), qd=tuple(self.qd[i]), side=side,
                           base_offset=PlanarVec(*self.finger_base[i]),
                           link_lengths=tuple(self.link_lengths[i]), mount=float(self.mount[i]))

    def objects(self):
        return [DiskObject(self.obj_ids[j], PlanarVec(*self.obj_pos[j]), float(self.obj_radius[j]),
                           float(self.obj_mass[j]), self.obj_labels[j], bool(self.obj_static[j]))
                for j in range(len(self.obj_ids))]

    def object_velocity(self, obj_id):
        j = self.obj_ids.index(obj_id)
        return PlanarVec(*self.obj_vel[j])

    def index_of(self, obj_id):
        return self.obj_ids.index(obj_id)

    def remove_object(self, obj_id):
        j = self.obj_ids.index(obj_id)
        keep = np.arange(len(self.obj_ids)) != j
        del self.obj_ids[j]
        del self.obj_labels[j]
        self.obj_pos = self.obj_pos[keep].copy()
        self.obj_vel = self.obj_vel[keep].copy()
        self.obj_radius = self.obj_radius[keep].copy()
        self.obj_mass = self.obj_mass[keep].copy()
        self.obj_static = self.obj_static[keep].copy()
        rows = np.concatenate((np.ones(3, dtype=bool), keep))
        self.anchor = self.anchor[rows][:, keep].copy()

    def set_base_velocity(self, vx, vy, omega=0.0):
        self.base_vel[0] = vx
        self.base_vel[1] = vy
        self.base_vel[2] = omega

    def check_finite(self):
        i = K.first_nonfinite(self.q, self.qd, self.obj_pos, self.obj_vel, self.base_pose)
        if i >= 0:
            raise SimulationDiverged(("q", "qd", "obj_pos", "obj_vel", "base_pose")[i])


_SIGNS = np.array([1.0, -1.0])


@dataclass(frozen=True)
class ContactPair:
    body: str
    object_id: str
    point: PlanarVec
    normal: PlanarVec
    penetration: float
    normal_force: float
    tangential_force: float


@dataclass(frozen=True)
class ContactResolution:
    pairs: tuple = ()

    def for_body(self, body):
        return [p for p in self.pairs if p.body == body]


def _body_name(world, code):
    code = int(code)
    if code == K.BODY_LEFT:
        return LEFT
    if code == K.BODY_RIGHT:
        return RIGHT
    if code == K.BODY_PALM:
        return "palm"
    return world.obj_ids[code - 3]


def contact_array(world):
    rows = np.empty((MAX_CONTACT_ROWS, K.N_CONTACT_COLS))
    m = K.contact_rows(world.q, world.qd, world.base_pose, world.base_vel, world.finger_base,
                       world.link_lengths, world.mount, _SIGNS, world.obj_pos, world.obj_vel,
                       world.obj_radius, world.anchor, world.params.as_array(), rows)
    return rows[:m]


def resolve_contacts(world):
    """All current contacts as tagged pairs (bodies: left/right tip, palm, or another object)."""
    pairs = []
    for row in contact_array(world):
        pairs.append(ContactPair(
            body=_body_name(world, row[K.C_BODY]),
            object_id=world.obj_ids[int(row[K.C_OBJ])],
            point=PlanarVec(float(row[K.C_PX]), float(row[K.C_PY])),
            normal=PlanarVec(float(row[K.C_NX]), float(row[K.C_NY])),
            penetration=float(row[K.C_PEN]),
            normal_force=float(row[K.C_FN]),
            tangential_force=float(row[K.C_FT]),
        ))
    return ContactResolution(tuple(pairs))


class Stepper:
    """Reusable buffers for advancing one WorldState in place."""

    def __init__(self, world):
        self.world = world
        self.prm = world.params.as_array()
        self.inertia = np.asarray(world.params.joint_inertia, dtype=float)
        self.damping = np.asarray(world.params.joint_damping, dtype=float)
        self.rows = np.empty((MAX_CONTACT_ROWS, K.N_CONTACT_COLS))

    def advance(self, torques, nsteps):
        w = self.world
        if nsteps <= 0:
            return
        K.step_n(w.q, w.qd, w.base_pose, w.base_vel, w.finger_base, w.link_lengths, w.mount,
                 _SIGNS, w.obj_pos, w.obj_vel, w.obj_radius, w.obj_mass, w.obj_static, w.anchor,
                 torques, self.inertia, self.damping, self.prm, w.params.dt, nsteps, self.rows)
        w.steps += nsteps
        w.time = w.steps * w.params.dt
        w.check_finite()

    def refresh(self):
        """Rebind after objects were added or removed."""
        self.prm = self.world.params.as_array()


def step(world, torques, dt=DT):
    """One physics step; returns a new state and leaves ``world`` untouched."""
    if dt != world.params.dt:
        raise ValueError(f"fixed timestep is {world.params.dt!r} s, got {dt!r}")
    tau = np.ascontiguousarray(torques, dtype=float).reshape(2, 3)
    if not np.all(np.isfinite(tau)):
        raise SimulationDiverged("torques")
    out = world.copy()
    Stepper(out).advance(tau, 1)
    return out


def tip_world_positions(world):
    pts = np.empty((4, 2))
    res = []
    c, s = math.cos(world.base_pose[2]), math.sin(world.base_pose[2])
    for f in range(2):
        K.finger_chain(world.q[f], world.finger_base[f], world.link_lengths[f], world.mount[f],
                       _SIGNS[f], pts)
        gx, gy = pts[3]
        res.append((world.base_pose[0] + c * gx - s * gy, world.base_pose[1] + s * gx + c * gy))
    return res


HELD = "HELD"
DROPPED = "DROPPED"


@dataclass
class TransportResult:
    verdict: str
    distance: float
    duration: float
    drop_distance: float = math.nan
    reason: str = ""


def transport_check(world, place_target, hold_q, object_id=None, tau_ff=None, gains=None,
                    cfg=None, ramp_time=0.1, on_tick=None):
    """Carry the grasped object to ``place_target`` and judge whether it stayed in hand.

    The base moves in a straight line at ``transport_speed`` (accelerating and
    braking over ``ramp_time``) while the fingers hold ``hold_q`` under the joint PD law at
    the control rate. ``world`` is advanced in place. HELD requires both tips
    to keep f_n > gamma_F on the object throughout and the object centre to stay
    within 2 cm of its starting gripper-frame position.
    """
    cfg = cfg or ReflexConfig()
    gains = gains or JointGains()
    p = world.params
    hold_q = np.asarray(hold_q, dtype=float).reshape(2, 3).tolist()
    zero = [[0.0] * 3, [0.0] * 3]
    tau_ff = zero if tau_ff is None else np.asarray(tau_ff, dtype=float).reshape(2, 3).tolist()
    start = PlanarVec(float(world.base_pose[0]), float(world.base_pose[1]))
    delta = PlanarVec(place_target.x, place_target.y) - start
    dist = delta.norm()
    if object_id is None:
        if not world.obj_ids:
            return TransportResult(DROPPED, dist, 0.0, 0.0, "no object")
        object_id = _nearest_to_palm(world)
    j = world.index_of(object_id)
    frame0 = world.gripper
    rel0 = world_to_gripper(PlanarVec(*world.obj_pos[j]), frame0)

    def in_hand():
        held = {LEFT: False, RIGHT: False}
        for row in contact_array(world):
            b = int(row[K.C_BODY])
            if b < 2 and int(row[K.C_OBJ]) == j and row[K.C_FN] > cfg.gamma_F:
                held[LEFT if b == 0 else RIGHT] = True
        if not (held[LEFT] and held[RIGHT]):
            return "contact lost"
        rel = world_to_gripper(PlanarVec(*world.obj_pos[j]), world.gripper)
        if (rel - rel0).norm() > 0.02:
            return "object slipped"
        return ""

    reason = in_hand()
    if dist == 0.0:
        return TransportResult(HELD if not reason else DROPPED, 0.0, 0.0, math.nan, reason)
    if reason:
        return TransportResult(DROPPED, dist, 0.0, 0.0, reason)
    u = delta * (1.0 / dist)
    stepper = Stepper(world)
    ctrl_dt = p.dt * p.control_decimation
    t0 = world.time
    travelled = 0.0
    while True:
        elapsed = world.time - t0
        speed = p.transport_speed * min(1.0, elapsed / ramp_time) if ramp_time > 0 else p.transport_speed
        remaining = dist - travelled
        if remaining <= 1e-9:
            world.set_base_velocity(0.0, 0.0)
            break
        if ramp_time > 0:
            # symmetric braking so the carry ends as gently as it starts
            speed = min(speed, math.sqrt(2.0 * p.transport_speed / ramp_time * remaining))
        speed = min(speed, remaining / ctrl_dt)
        world.set_base_velocity(u.x * speed, u.y * speed)
        tau = pd_torques(hold_q, zero, world.q.tolist(), world.qd.tolist(), tau_ff, gains)
        stepper.advance(tau, p.control_decimation)
        travelled += speed * ctrl_dt
        if on_tick is not None:
            on_tick(world)
        reason = in_hand()
        if reason:
            world.set_base_velocity(0.0, 0.0)
            return TransportResult(DROPPED, dist, world.time - t0, travelled, reason)
    return TransportResult(HELD, dist, world.time - t0)


def _nearest_to_palm(world):
    g = world.gripper
    best, best_d = None, math.inf
    for j, oid in enumerate(world.obj_ids):
        d = world_to_gripper(PlanarVec(*world.obj_pos[j]), g).norm()
        if d < best_d:
            best, best_d = oid, d
    return best
