import math

import numpy as np
import pytest

from reflexgrasp.core import DiskObject, PlanarVec
from reflexgrasp.perception import (Camera, InsufficientData, OccludedObject, SyntheticScan, closest_visible,
                                    extract_target, is_occluded, synth_scan, visible_half_angle)

CAM = Camera(PlanarVec(0.0, 0.0), 0.0)


def disk(x, y, r, i="d"):
    return DiskObject(i, PlanarVec(x, y), r)


def scan_of(points, depths):
    return SyntheticScan(np.asarray(points, dtype=float), np.asarray(depths, dtype=float))


def test_noiseless_points_on_visible_arc():
    o = disk(0.4, 0.1, 0.03)
    s = synth_scan(o, CAM, 50, 0.0, np.random.default_rng(0))
    r = np.hypot(s.points[:, 0] - 0.4, s.points[:, 1] - 0.1)
    assert np.allclose(r, 0.03, atol=1e-12)
    # every point faces the camera
    alpha = visible_half_angle(o, CAM)
    phi0 = math.atan2(-0.1, -0.4)
    ang = np.arctan2(s.points[:, 1] - 0.1, s.points[:, 0] - 0.4) - phi0
    ang = (ang + np.pi) % (2 * np.pi) - np.pi
    assert np.all(np.abs(ang) <= alpha + 1e-12)


def test_point_count_and_minimum():
    assert len(synth_scan(disk(0.4, 0, 0.03), CAM, 20, 0.0, np.random.default_rng(0)).points) == 20
    with pytest.raises(ValueError):
        synth_scan(disk(0.4, 0, 0.03), CAM, 19, 0.0, np.random.default_rng(0))


def test_noise_rms():
    rng = np.random.default_rng(1)
    s = synth_scan(disk(0.4, 0.0, 0.03), CAM, 10000, 0.005, rng)
    clean = synth_scan(disk(0.4, 0.0, 0.03), CAM, 10000, 0.0, np.random.default_rng(1))
    dev = np.hypot(*(s.points - clean.points).T)
    # isotropic 2-D noise: per-axis sigma 5 mm
    assert np.sqrt(np.mean(dev ** 2) / 2) == pytest.approx(0.005, abs=0.0002)


def test_occlusion():
    front, back = disk(0.3, 0.0, 0.04, "front"), disk(0.5, 0.0, 0.03, "back")
    assert is_occluded(back, [front, back], CAM) and not is_occluded(front, [front, back], CAM)
    with pytest.raises(OccludedObject):
        synth_scan(back, CAM, 30, 0.0, np.random.default_rng(0), others=[front, back])
    assert closest_visible([back, front], CAM).id == "front"


def test_extract_identical_points():
    t = extract_target(scan_of([(1, 2)] * 10, [1.0] * 10))
    assert (t.x, t.y) == (1.0, 2.0)


def test_extract_trims_outliers():
    pts = [(1, 0)] * 8 + [(5, 5), (9, 9)]
    depths = [1.0] * 8 + [0.1, 5.0]
    t = extract_target(scan_of(pts, depths))
    assert (t.x, t.y) == (1.0, 0.0)


def test_extract_needs_ten_points():
    with pytest.raises(InsufficientData):
        extract_target(scan_of([(0, 0)] * 9, [1.0] * 9))


def test_half_circle_centroid_bias():
    # a dense, evenly spaced half-circle facing the camera: the mean sits 2r/pi toward the camera
    r, n = 0.03, 200001
    phi = np.pi + np.linspace(-np.pi / 2, np.pi / 2, n)
    pts = np.column_stack((0.5 + r * np.cos(phi), r * np.sin(phi)))
    # trimming drops the two deepest tails (the half-circle's ends) equally, so use the same arc
    keep_frac = math.ceil(0.1 * n - 1e-9)
    t = extract_target(scan_of(pts, pts[:, 0]))
    order = np.argsort(pts[:, 0], kind="stable")
    survivors = pts[order[keep_frac:n - keep_frac]]
    assert t.x == pytest.approx(survivors[:, 0].mean(), abs=1e-9)
    untrimmed = pts[:, 0].mean()
    assert 0.5 - untrimmed == pytest.approx(2 * r / math.pi, abs=1e-6)


def test_permutation_invariance_and_tail_insensitivity():
    rng = np.random.default_rng(3)
    s = synth_scan(disk(0.4, 0.05, 0.03), CAM, 60, 0.01, rng)
    t = extract_target(s)
    perm = rng.permutation(60)
    t2 = extract_target(scan_of(s.points[perm], s.depths[perm]))
    assert (t.x, t.y) == (t2.x, t2.y)
    k = int(np.argmax(s.depths))
    pts, dep = s.points.copy(), s.depths.copy()
    pts[k] += (3.0, 3.0)
    dep[k] += 10.0
    t3 = extract_target(scan_of(pts, dep))
    assert (t.x, t.y) == (t3.x, t3.y)
