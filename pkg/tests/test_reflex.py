import math

import numpy as np
import pytest

from reflexgrasp.core import DiskObject, PlanarVec, ReflexConfig
from reflexgrasp.experiments import CUP_RADIUS, NOMINAL_TARGET, run_trial
from reflexgrasp.fingers import LEFT, RIGHT
from reflexgrasp.reflex import (ANTIPODAL, PINCH_PULL, POWER_WRAP, GraspPhase, NoEstimate, ObjectEstimate,
                                ReflexState, Observation, antipodal_ok, estimate_object, evaluate_success,
                                evaluate_triggers, plan_regrasp, potential_field_force, reflex_tick,
                                select_branch)
from reflexgrasp.sensing import NO_CONTACT, ContactReading, ProximityVector
from reflexgrasp.sim import EventLog

CFG = ReflexConfig()


def prox(**kw):
    return ProximityVector()._replace(**kw)


def test_field_zero_when_far():
    F = potential_field_force(LEFT, prox(), CFG, 0.7)
    assert (F.x, F.y) == (0.0, 0.0)


def test_field_out_term():
    # heading 0: the left tip's outward direction is +y
    F = potential_field_force(LEFT, prox(d_l_out=0.05), CFG, 0.0)
    assert F.y == pytest.approx(20 * (0.05 - 0.09)) and F.y == pytest.approx(-0.8)
    assert abs(F.x) < 1e-15


@pytest.mark.parametrize("d,mag", [(0.08, 0.24), (0.04, -0.24)])
def test_field_in_term_two_sided(d, mag):
    F = potential_field_force(RIGHT, prox(d_r_in=d), CFG, 0.0)
    # the right tip's inward direction at heading 0 is +y
    assert F.y == pytest.approx(mag) and abs(F.x) < 1e-15


def test_field_sign_property():
    rng = np.random.default_rng(20)
    for _ in range(2000):
        side = LEFT if rng.random() < 0.5 else RIGHT
        h = rng.uniform(-math.pi, math.pi)
        k = rng.integers(3)
        d = rng.uniform(0.0, 0.2)
        names = {LEFT: ("d_l_out", "d_l_forward", "d_l_in"), RIGHT: ("d_r_out", "d_r_forward", "d_r_in")}[side]
        F = potential_field_force(side, prox(**{names[k]: d}), CFG, h)
        c, s = math.cos(h), math.sin(h)
        out = (-s, c) if side == LEFT else (s, -c)
        e = [out, (c, s), (-out[0], -out[1])][k]
        along = F.x * e[0] + F.y * e[1]
        thresh = 0.09
        des = [0.09, 0.09, 0.06][k]
        if d >= thresh:
            assert along == 0.0 and F.x == 0.0 and F.y == 0.0
        else:
            assert np.sign(along) == np.sign(d - des)


def test_trigger_examples():
    t = evaluate_triggers(prox(d_palm=0.04), 0.5, 0.5, CFG)
    assert t.beta_near and t.beta_far
    t = evaluate_triggers(prox(d_palm=0.07), 0.5, 0.5, CFG)
    assert not t.beta_near and t.beta_far
    assert evaluate_triggers(prox(d_l_forward=0.03), 0.5, 0.5, CFG).beta_occlude
    assert evaluate_triggers(prox(), -0.1, -0.2, CFG).beta_tips
    assert not evaluate_triggers(prox(), -0.1, 0.2, CFG).beta_tips


def test_near_implies_far():
    rng = np.random.default_rng(21)
    for d in rng.uniform(0, 0.2, 10000):
        t = evaluate_triggers(prox(d_palm=float(d)), 0.0, 0.0, CFG)
        assert not t.beta_near or t.beta_far


def C(f):
    return ContactReading(True, 0.0, f, 0.0)


def test_success_examples():
    assert evaluate_success(C(0.6), C(0.7), 0.1, 0.1, prox(d_palm=0.05), CFG)
    assert not evaluate_success(C(0.6), C(0.4), 0.1, 0.1, prox(d_palm=0.05), CFG)
    assert not evaluate_success(C(0.6), C(0.7), 0.1, 0.1, prox(d_palm=0.10), CFG)


def test_success_monotone():
    rng = np.random.default_rng(22)
    for _ in range(5000):
        fl, fr = rng.uniform(0, 1, 2)
        vl, vr = rng.uniform(0, 0.4, 2)
        d = prox(d_palm=float(rng.uniform(0, 0.12)))
        if evaluate_success(C(fl), C(fr), vl, vr, d, CFG):
            dfl, dvr = rng.uniform(0, 0.5), rng.uniform(0, vr)
            assert evaluate_success(C(fl + dfl), C(fr), vl, vr - dvr, d, CFG)


def test_estimate_symmetric_example():
    est = estimate_object(PlanarVec(1, 2), PlanarVec(0, -1), PlanarVec(1, -2), PlanarVec(0, 1))
    assert (est.center.x, est.center.y, est.radius) == pytest.approx((1.0, 0.0, 2.0), abs=1e-12)


def test_estimate_failures():
    with pytest.raises(NoEstimate):
        estimate_object(PlanarVec(0, 1), PlanarVec(0, -1), PlanarVec(0, -1), PlanarVec(0, -1))
    with pytest.raises(NoEstimate):
        # normals pointing away from each other give a negative radius
        estimate_object(PlanarVec(0, 1), PlanarVec(0, 1), PlanarVec(0, -1), PlanarVec(0, -1))


def test_branch_examples():
    assert select_branch(0.09, 0.07, 0.07, 0.03, CFG) is PINCH_PULL
    assert select_branch(0.05, 0.07, 0.07, 0.02, CFG) is ANTIPODAL
    assert select_branch(0.05, 0.07, 0.07, 0.04, CFG) is POWER_WRAP
    assert select_branch(0.07, 0.06, 0.08, 0.02, CFG) is POWER_WRAP
    # ties are neither greater nor less
    assert select_branch(0.07, 0.07, 0.07, 0.02, CFG) is POWER_WRAP


def test_plan_pinch_pull_waypoints():
    est = ObjectEstimate(PlanarVec(0.09, 0.0), 0.03)
    branch, segs = plan_regrasp(est, 0.07, 0.07, CFG)
    assert branch is PINCH_PULL
    kinds = [s.kind for s in segs]
    assert kinds[-1] == "squeeze" and "pull" in kinds
    pull = segs[kinds.index("pull")]
    # pull toward the palm until the centre sits at d_des_in
    assert pull.left[0] == pytest.approx(CFG.d_des_in) and pull.right[0] == pytest.approx(CFG.d_des_in)
    assert pull.left[1] > 0 > pull.right[1]


def test_plan_far_object_advances_base():
    est = ObjectEstimate(PlanarVec(0.16, 0.0), 0.025)
    branch, segs = plan_regrasp(est, 0.1, 0.1, CFG)
    assert branch is PINCH_PULL
    (adv,) = [s for s in segs if s.kind == "advance"]
    assert adv.left[0] == pytest.approx(0.16 - 0.115)


def test_plan_antipodal_and_wrap():
    branch, segs = plan_regrasp(ObjectEstimate(PlanarVec(0.05, 0.01), 0.02), 0.07, 0.07, CFG)
    assert branch is ANTIPODAL
    assert segs[-1].left[0] == pytest.approx(0.05)
    assert segs[-1].left[1] > 0.01 > segs[-1].right[1]
    branch, segs = plan_regrasp(ObjectEstimate(PlanarVec(0.05, 0.0), 0.04), 0.07, 0.07, CFG)
    assert branch is POWER_WRAP
    assert segs[-1].left[2] < 0  # tips curl inward around the object
    branch, _ = plan_regrasp(None, 0.07, 0.07, CFG)
    assert branch is POWER_WRAP


def test_antipodal_check():
    g = math.radians(20)
    assert antipodal_ok(PlanarVec(0, -1), PlanarVec(0, 1), g)
    a = math.radians(19)
    assert antipodal_ok(PlanarVec(0, -1), PlanarVec(math.sin(a), math.cos(a)), g)
    a = math.radians(21)
    assert not antipodal_ok(PlanarVec(0, -1), PlanarVec(math.sin(a), math.cos(a)), g)


def _obs(t=0.0, pose=(0.0, 0.0, 0.0), d=None):
    z = (0.0, 0.0, 0.0)
    return Observation(t, d or prox(), NO_CONTACT, NO_CONTACT, (1.0, 0.0, 0.5), z, (1.0, 0.0, 0.5), z, pose)


def test_reflex_tick_is_pure():
    st = ReflexState(target=(0.3, 0.0))
    cmd, nxt = reflex_tick(_obs(), st)
    assert st.phase is GraspPhase.APPROACH and st.q_cmd is None
    assert nxt.phase is GraspPhase.APPROACH and cmd.base_speed > 0
    cmd2, nxt2 = reflex_tick(_obs(), st)
    assert cmd2 == cmd
    # a close palm reading starts the grasp
    _, n3 = reflex_tick(_obs(d=prox(d_palm=0.04)), st)
    assert n3.phase is GraspPhase.CLOSING and n3.trigger_cause == "near" and n3.grasp_start_time == 0.0


def _phases(log):
    out = []
    for row in log.rows:
        if not out or out[-1][0] != row[1]:
            out.append((row[1], row[0]))
    return out


def test_empty_scene_times_out():
    lg = EventLog()
    rec = run_trial("full", [], NOMINAL_TARGET, seed=0, event_log=lg)
    assert rec.outcome == "FAILED" and rec.note == "timeout"
    seq = _phases(lg)
    names = [p for p, _ in seq]
    assert names[:3] == ["APPROACH", "CLOSING", "EVALUATE"] and names[-1] == "FAILED"
    t_start = dict(seq)["CLOSING"]
    t_fail = seq[-1][1]
    assert t_fail - t_start == pytest.approx(CFG.t_fail, abs=0.01)
    # nothing but the terminal phase is active past the budget
    for t, phase, *_ in lg.rows:
        if t - t_start > CFG.t_fail + 0.004:
            assert phase == "FAILED"


def test_nominal_cup_succeeds_without_regrasp():
    cup = DiskObject("cup", PlanarVec(*NOMINAL_TARGET), CUP_RADIUS)
    for seed in (0, 1, 2):
        rec = run_trial("full", [cup], NOMINAL_TARGET, seed=seed)
        assert rec.outcome == "SUCCEEDED" and rec.regrasp_count == 0


def test_far_cup_uses_pinch_pull():
    cup = DiskObject("cup", PlanarVec(NOMINAL_TARGET[0] + 0.05, 0.0), CUP_RADIUS)
    lg = EventLog()
    rec = run_trial("full", [cup], NOMINAL_TARGET, seed=0, event_log=lg)
    assert rec.outcome == "SUCCEEDED"
    names = [p for p, _ in _phases(lg)]
    assert "REGRASP_PINCH_PULL" in names
    assert names.index("REGRASP_PINCH_PULL") < names.index("TRANSPORT")


def test_partial_never_regrasps():
    cup = DiskObject("cup", PlanarVec(NOMINAL_TARGET[0] + 0.05, 0.0), CUP_RADIUS)
    rec = run_trial("partial", [cup], NOMINAL_TARGET, seed=0)
    assert rec.regrasp_count == 0 and rec.branches == ""
    assert rec.outcome == "FAILED"
