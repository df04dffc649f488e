import math

import numpy as np
import pytest

from reflexgrasp.core import (CONFIG_KEYS, ConfigError, DiskObject, GripperFrame, PlanarVec, ReflexConfig,
                              dump_config, gripper_to_world, load_config, parse_config, wrap_angle,
                              world_to_gripper)


def test_table_defaults():
    c = ReflexConfig()
    assert (c.d_thresh_out, c.d_thresh_forward, c.d_thresh_in, c.d_des_in) == (0.09, 0.09, 0.09, 0.06)
    assert (c.K_out, c.K_forward, c.K_in) == (20.0, 30.0, 12.0)
    assert (c.d_near, c.d_far, c.d_occlude) == (0.05, 0.09, 0.04)
    assert c.gamma_a == pytest.approx(math.radians(20))
    assert (c.r_power, c.gamma_v, c.gamma_F, c.t_fail) == (0.03, 0.2, 0.5, 3.0)
    assert c.theta_close == 0.0 and c.clearance_baseline == 0.01


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    c = load_config(p)
    assert c == ReflexConfig() and c.K_out == 20.0


def test_override_t_fail(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("t_fail = 5.0\n")
    c = load_config(p)
    assert c.t_fail == 5.0
    assert c == ReflexConfig(t_fail=5.0)


def test_ordering_invariant_names_field(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("# comment\nd_des_in = 0.10\n")
    with pytest.raises(ConfigError) as ei:
        load_config(p)
    assert ei.value.key == "d_des_in"
    assert ei.value.line == 2
    assert "d_des_in" in str(ei.value)


@pytest.mark.parametrize("text,key", [("K_in = -1.0\n", "K_in"), ("t_fail = 0\n", "t_fail"),
                                      ("gamma_v = \"fast\"\n", "gamma_v"), ("d_near = nan\n", "d_near")])
def test_invalid_values_rejected(text, key):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.key == key


def test_unknown_key_and_parse_error_have_location():
    with pytest.raises(ConfigError) as ei:
        parse_config("t_fail = 3.0\nK_typo = 1.0\n", "x.toml")
    assert ei.value.line == 2 and "K_typo" in str(ei.value)
    with pytest.raises(ConfigError) as ei:
        parse_config("t_fail = = 3\n", "x.toml")
    assert "x.toml" in str(ei.value)


def test_config_round_trip():
    c = ReflexConfig(t_fail=4.5, K_in=13.0, antipodal_check=False, theta_close=-0.1)
    assert parse_config(dump_config(c)) == c
    assert set(CONFIG_KEYS) == set(parse_config(dump_config(c)).__dataclass_fields__)


def test_frame_examples():
    f = GripperFrame(PlanarVec(0.3, -0.2), 1.1)
    p = world_to_gripper(f.origin, f)
    assert abs(p.x) < 1e-15 and abs(p.y) < 1e-15
    p = world_to_gripper(PlanarVec(1, 2), GripperFrame(PlanarVec(0, 0), 0.0))
    assert (p.x, p.y) == (1.0, 2.0)
    # rotation by +90 deg about (1, 0): the world point (1, 1) lies straight ahead
    p = world_to_gripper(PlanarVec(1, 1), GripperFrame(PlanarVec(1, 0), math.pi / 2))
    assert p.x == pytest.approx(1.0, abs=1e-12) and p.y == pytest.approx(0.0, abs=1e-12)


def test_frame_round_trip_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        f = GripperFrame(PlanarVec(*rng.uniform(-2, 2, 2)), rng.uniform(-10, 10))
        p = PlanarVec(*rng.uniform(-2, 2, 2))
        q = gripper_to_world(world_to_gripper(p, f), f)
        assert abs(q.x - p.x) < 1e-12 and abs(q.y - p.y) < 1e-12


def test_frame_matches_rotation_matrix():
    rng = np.random.default_rng(1)
    for _ in range(100):
        o, h = rng.uniform(-1, 1, 2), rng.uniform(-4, 4)
        p = rng.uniform(-1, 1, 2)
        R = np.array([[math.cos(h), -math.sin(h)], [math.sin(h), math.cos(h)]])
        expect = R.T @ (p - o)
        got = world_to_gripper(PlanarVec(*p), GripperFrame(PlanarVec(*o), h))
        assert np.allclose([got.x, got.y], expect, atol=1e-12)


def test_heading_normalized():
    assert GripperFrame(PlanarVec(0, 0), 3 * math.pi).heading == pytest.approx(math.pi)
    assert GripperFrame(PlanarVec(0, 0), -math.pi).heading == pytest.approx(math.pi)
    for a in np.linspace(-20, 20, 101):
        w = wrap_angle(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_disk_invariants():
    with pytest.raises(ValueError):
        DiskObject("a", PlanarVec(0, 0), 0.0)
    with pytest.raises(ValueError):
        DiskObject("a", PlanarVec(0, 0), 0.01, mass=-1.0)
