"""Fingertip/palm time-of-flight rays and the fingertip contact sensor."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .core import wrap_angle
from .fingers import LEFT, RIGHT

D_MAX = 0.20

PROXIMITY_FIELDS = ("d_l_out", "d_l_forward", "d_l_in", "d_palm", "d_r_in", "d_r_forward", "d_r_out")


class ProximityVector(NamedTuple):
    d_l_out: float = D_MAX
    d_l_forward: float = D_MAX
    d_l_in: float = D_MAX
    d_palm: float = D_MAX
    d_r_in: float = D_MAX
    d_r_forward: float = D_MAX
    d_r_out: float = D_MAX

    def tip(self, side):
        """(out, forward, in) distances for one fingertip."""
        if side == LEFT:
            return self.d_l_out, self.d_l_forward, self.d_l_in
        return self.d_r_out, self.d_r_forward, self.d_r_in


class ContactReading(NamedTuple):
    in_contact: bool = False
    theta: float = 0.0
    f_normal: float = 0.0
    f_shear: float = 0.0


NO_CONTACT = ContactReading()


def raycast_disk(origin, direction, disk, d_max=D_MAX):
    """Distance from ``origin`` along unit ``direction`` to ``disk``; None when there is no hit."""
    n = math.hypot(direction.x, direction.y)
    if abs(n - 1.0) > 1e-9:
        raise ValueError(f"ray direction must be a unit vector (|dir| = {n!r})")
    t = K.ray_disk(origin.x, origin.y, direction.x, direction.y,
                   disk.center.x, disk.center.y, disk.radius)
    if t > d_max:
        return None
    return t


def tip_directions(heading, side):
    """Unit (out, forward, in) directions of a fingertip with gripper-frame ``heading``."""
    fwd = (math.cos(heading), math.sin(heading))
    if side == LEFT:
        out = (-fwd[1], fwd[0])
    else:
        out = (fwd[1], -fwd[0])
    return out, fwd, (-out[0], -out[1])


def sensor_rays(world):
    """Ray origins and directions (world frame) in ProximityVector order."""
    pts = np.empty((4, 2))
    origins = np.empty((7, 2))
    dirs = np.empty((7, 2))
    bx, by, bh = world.base_pose
    c, s = math.cos(bh), math.sin(bh)
    for f, side in enumerate((LEFT, RIGHT)):
        K.finger_chain(world.q[f], world.finger_base[f], world.link_lengths[f], world.mount[f],
                       world.signs[f], pts)
        gx, gy = pts[3]
        heading = world.signs[f] * (world.mount[f] + world.q[f].sum())
        wx, wy = bx + c * gx - s * gy, by + s * gx + c * gy
        out, fwd, inw = tip_directions(heading + bh, side)
        idx = (0, 1, 2) if side == LEFT else (6, 5, 4)
        for k, d in zip(idx, (out, fwd, inw)):
            origins[k] = wx, wy
            dirs[k] = d
    px = world.params.palm_x
    origins[3] = bx + c * px, by + s * px
    dirs[3] = c, s
    return origins, dirs


def sample_proximity(world, rays=None):
    """Fresh ProximityVector; each entry is the nearest hit over all objects, capped at d_max."""
    origins, dirs = sensor_rays(world) if rays is None else rays
    out = np.empty(7)
    K.cast_rays(origins, dirs, world.obj_pos, world.obj_radius, world.params.d_max, out)
    return ProximityVector(*out.tolist())


def sense_contact(resolution, tip, tip_heading, rng=None, sigma_force=0.02, sigma_theta=0.01):
    """Contact reading for one fingertip.

    ``tip_heading`` is the tip's heading in the same frame as the resolution's
    normals. Uses the strongest pair on that tip. With ``rng`` given, zero-mean
    Gaussian noise is added to the forces and the bearing.
    """
    best = None
    for p in resolution.pairs:
        if p.body == tip and (best is None or p.normal_force > best.normal_force):
            best = p
    if best is None:
        return NO_CONTACT
    theta = wrap_angle(math.atan2(best.normal.y, best.normal.x) - tip_heading)
    fn = best.normal_force
    fs = -best.tangential_force
    if rng is not None:
        fn += sigma_force * rng.standard_normal()
        fs += sigma_force * rng.standard_normal()
        theta = wrap_angle(theta + sigma_theta * rng.standard_normal())
    return ContactReading(True, theta, max(fn, 0.0), fs)


class SensorHold:
    """Zero-order hold of proximity and contact readings between refreshes."""

    def __init__(self, world, rng=None):
        self.world = world
        self.rng = rng if world.params.sensor_noise else None
        self.prox = ProximityVector()
        self.contacts = {LEFT: NO_CONTACT, RIGHT: NO_CONTACT}
        self.refreshes = 0
        self._prm = world.params.as_array()
        self._prox = np.empty(7)
        self._tips = np.zeros((2, 4))
        self._rows = np.empty((64, K.N_CONTACT_COLS))

    def refresh(self):
        w = self.world
        p = w.params
        K.sensor_snapshot(w.q, w.qd, w.base_pose, w.base_vel, w.finger_base, w.link_lengths,
                          w.mount, w.signs, w.obj_pos, w.obj_vel, w.obj_radius, w.anchor, self._prm,
                          p.d_max, self._prox, self._tips, self._rows)
        self.prox = ProximityVector(*self._prox.tolist())
        rng = self.rng
        for f, side in enumerate((LEFT, RIGHT)):
            inc, th, fn, fs = self._tips[f].tolist()
            if not inc:
                self.contacts[side] = NO_CONTACT
                continue
            if rng is not None:
                fn += p.sigma_force * rng.standard_normal()
                fs += p.sigma_force * rng.standard_normal()
                th = wrap_angle(th + p.sigma_theta * rng.standard_normal())
            self.contacts[side] = ContactReading(True, th, max(fn, 0.0), fs)
        self.refreshes += 1

    def read(self):
        return self.prox, self.contacts[LEFT], self.contacts[RIGHT]
