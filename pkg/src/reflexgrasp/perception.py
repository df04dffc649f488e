"""Synthetic depth scans of disks and the trimmed-centroid grasp target."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import PlanarVec

TRIM_FRACTION = 0.1
MIN_SCAN_POINTS = 20
MIN_TARGET_POINTS = 10


class OccludedObject(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    position: PlanarVec
    heading: float = 0.0

    @property
    def axis(self):
        return PlanarVec(math.cos(self.heading), math.sin(self.heading))


@dataclass(frozen=True)
class SyntheticScan:
    points: np.ndarray  # (n, 2) world coordinates
    depths: np.ndarray  # (n,) distance along the camera axis
    source_object: str = ""


def visible_half_angle(obj, camera):
    d = (obj.center - camera.position).norm()
    if d <= obj.radius:
        raise ValueError("camera is inside the object")
    return math.acos(obj.radius / d)


def is_occluded(obj, others, camera):
    """True when the sight line from the camera to the object's centre crosses another disk first."""
    to_c = obj.center - camera.position
    dist = to_c.norm()
    u = to_c * (1.0 / dist)
    near = dist - obj.radius
    for o in others:
        if o.id == obj.id:
            continue
        t = K.ray_disk(camera.position.x, camera.position.y, u.x, u.y,
                       o.center.x, o.center.y, o.radius)
        if t < near:
            return True
    return False


def synth_scan(obj, camera, n, noise_sigma, rng, others=()):
    """``n`` points drawn uniformly (in angle) on the camera-facing arc, plus isotropic noise."""
    if n < MIN_SCAN_POINTS:
        raise ValueError(f"need at least {MIN_SCAN_POINTS} points, got {n}")
    if is_occluded(obj, others, camera):
        raise OccludedObject(f"object {obj.id!r} is occluded")
    alpha = visible_half_angle(obj, camera)
    to_cam = camera.position - obj.center
    phi0 = math.atan2(to_cam.y, to_cam.x)
    phi = phi0 + rng.uniform(-alpha, alpha, size=n)
    pts = np.column_stack((obj.center.x + obj.radius * np.cos(phi),
                           obj.center.y + obj.radius * np.sin(phi)))
    if noise_sigma > 0:
        pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape)
    ax = camera.axis
    depths = (pts[:, 0] - camera.position.x) * ax.x + (pts[:, 1] - camera.position.y) * ax.y
    return SyntheticScan(pts, depths, obj.id)


def extract_target(scan):
    """Drop ceil(10 %) of the points at each end of the depth ordering and average the rest."""
    pts = np.asarray(scan.points, dtype=float)
    depths = np.asarray(scan.depths, dtype=float)
    n = len(depths)
    if n < MIN_TARGET_POINTS:
        raise InsufficientData(f"need at least {MIN_TARGET_POINTS} points, got {n}")
    k = math.ceil(TRIM_FRACTION * n - 1e-9)
    # lexsort on (depth, x, y) keeps the result independent of input order on depth ties
    order = np.lexsort((pts[:, 1], pts[:, 0], depths))
    keep = pts[order[k:n - k]]
    # sorted summation keeps the mean bit-identical under permutations of the input
    keep = keep[np.lexsort((keep[:, 1], keep[:, 0]))]
    return PlanarVec(float(math.fsum(keep[:, 0]) / len(keep)), float(math.fsum(keep[:, 1]) / len(keep)))


def closest_visible(objects, camera):
    """Nearest object to the camera whose centre is not hidden by another disk, or None."""
    ranked = sorted(objects, key=lambda o: ((o.center - camera.position).norm(), o.id))
    for o in ranked:
        if not is_occluded(o, objects, camera):
            return o
    return None
