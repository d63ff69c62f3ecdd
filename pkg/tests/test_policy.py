"""Policy chain construction, trial execution, and correction tests."""

import numpy as np
import pytest

from ec_lfd.augment import augment_demonstration
from ec_lfd.demo import (EVENT_BREAKING, EVENT_MAKING, EVENT_NON_CONTACT,
                         Demonstration, MotionPhase, Waypoint)
from ec_lfd.errors import KindMismatch, UnlabeledPhase, ValidationError
from ec_lfd.policy import (Correction, Policy, PolicyNode, _refit_fragment,
                           apply_correction, build_policy, execute,
                           load_correction, load_policy, policy_from_json,
                           policy_to_json, save_correction, save_policy)
from ec_lfd.primitives import EcPrimitive
from ec_lfd.scenarios import (_key_lock_world, _plane, make_correction,
                              make_scenario)
from ec_lfd.se3 import Pose, Wrench, rotation_about_axis
from ec_lfd.segmentation import segment
from ec_lfd.world import ConstraintWorld

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


@pytest.fixture(scope="module")
def key_lock():
    world, demo = make_scenario("key_lock")
    phases = augment_demonstration(world, demo)
    policy = build_policy(world, demo, phases)
    return world, demo, policy


def _bad_yaw_seed(limit_deg, floor_deg):
    """First seed whose opening slip draw exceeds the floor angle."""
    rad = np.deg2rad(limit_deg)
    for seed in range(200):
        draw = np.random.default_rng(seed).uniform(-rad, rad)
        if abs(draw) > np.deg2rad(floor_deg):
            return seed
    raise AssertionError("no seed with a large slip draw")


def _good_yaw_seed(limit_deg, ceil_deg):
    rad = np.deg2rad(limit_deg)
    for seed in range(200):
        draw = np.random.default_rng(seed).uniform(-rad, rad)
        if abs(draw) < np.deg2rad(ceil_deg):
            return seed
    raise AssertionError("no seed with a small slip draw")


# ---------------------------------------------------------------------------
# construction


def test_build_policy_structure(key_lock):
    world, demo, policy = key_lock
    assert [n.name for n in policy.nodes] == ["phase00", "phase01", "phase02"]
    assert [n.kind for n in policy.nodes] == ["free", "plane", "translation"]
    assert [n.expected_event for n in policy.nodes] == [
        EVENT_MAKING, EVENT_BREAKING, EVENT_MAKING]
    approach = policy.nodes[0].primitive
    assert approach.funnel_into is not None
    assert approach.funnel_into.kind == "plane"
    assert approach.reference_cloud is not None
    assert not set(approach.reference_cloud.ids) & set(world.unstable_offsets)
    assert approach.demo_entry.almost_equal(demo.waypoints[0].pose, tol=1e-12)
    assert policy.nodes[1].primitive.model.kind == "plane"
    assert policy.nodes[2].primitive.model.kind == "translation"


def test_build_policy_rejects_unlabeled_phases():
    world, demo = make_scenario("key_lock")
    with pytest.raises(UnlabeledPhase):
        build_policy(world, demo, segment(demo))


# ---------------------------------------------------------------------------
# execution


def test_execute_key_lock_nominal(key_lock):
    world, demo, policy = key_lock
    log = execute(policy, world, demo.waypoints[0].pose)
    assert log.success
    assert log.failure is None
    assert [e for _, e in log.node_events] == [
        EVENT_MAKING, EVENT_BREAKING, EVENT_MAKING]
    assert log.sim.engagement is not None
    assert log.sim.engagement.region_id == "keyway"
    assert log.sim.engagement.coord >= 0.02
    assert log.violations == 0


def test_execute_reports_failure_as_data(key_lock):
    _, demo, policy = key_lock
    world_v2, _ = _key_lock_world(2)
    log = execute(policy, world_v2, demo.waypoints[0].pose)
    assert not log.success
    assert log.failure is not None
    assert log.failure.node == "phase01"
    assert log.failure.expected_event == EVENT_BREAKING
    assert log.failure.observed_event == EVENT_NON_CONTACT
    assert len(log.node_events) == 2


def test_raw_replay_skips_adaptation_and_violates():
    world = ConstraintWorld(regions=[
        _plane("floor", [0.0, 0.0, 0.0], Z, X, [0.2, 0.2])])
    wps = [Waypoint(0.01 * k, Pose(trans=np.array([0.0, 0.0, 0.01 - 0.004 * k])),
                    0.0, Wrench()) for k in range(5)]
    node = PolicyNode("phase00", "free",
                      EcPrimitive(kind="free", trajectory=wps,
                                  demo_entry=wps[0].pose),
                      EVENT_NON_CONTACT)
    log = execute(Policy(nodes=[node]), world, wps[0].pose, adapt=False)
    assert not log.success
    assert log.node_events == []
    assert log.violations >= 1


# ---------------------------------------------------------------------------
# corrections


def test_apply_correction_stage1_reaches_displaced_lock(key_lock):
    _, demo, policy = key_lock
    corrected = apply_correction(
        policy, Correction("phase01", make_correction("key_lock", 1)))
    assert [n.name for n in corrected.nodes] == [n.name for n in policy.nodes]
    assert corrected.node("phase01").primitive.wiggle == 0.0
    assert corrected.node("phase00").primitive.funnel_into is not None
    world_v2, _ = _key_lock_world(2)
    log = execute(corrected, world_v2, demo.waypoints[0].pose)
    assert log.success
    assert log.sim.engagement.region_id == "keyway"


def test_apply_correction_stage2_extracts_weave(key_lock):
    _, _, policy = key_lock
    corrected = apply_correction(
        policy, Correction("phase01", make_correction("key_lock", 2)))
    wiggle = corrected.node("phase01").primitive.wiggle
    assert np.deg2rad(3.0) <= wiggle <= np.deg2rad(9.0)


def test_weave_correction_beats_in_hand_slip(key_lock):
    _, demo, policy = key_lock
    corrected1 = apply_correction(
        policy, Correction("phase01", make_correction("key_lock", 1)))
    corrected2 = apply_correction(
        policy, Correction("phase01", make_correction("key_lock", 2)))
    start = demo.waypoints[0].pose

    bad = _bad_yaw_seed(6.0, 4.8)
    world_v2, _ = _key_lock_world(2)
    world_v2.slip_per_phase_deg = 6.0
    log1 = execute(corrected1, world_v2, start,
                   rng=np.random.default_rng(bad))
    assert not log1.success
    assert log1.failure.node == "phase01"

    world_v2, _ = _key_lock_world(2)
    world_v2.slip_per_phase_deg = 6.0
    log2 = execute(corrected2, world_v2, start,
                   rng=np.random.default_rng(bad))
    assert log2.success

    good = _good_yaw_seed(6.0, 3.0)
    world_v2, _ = _key_lock_world(2)
    world_v2.slip_per_phase_deg = 6.0
    log3 = execute(corrected1, world_v2, start,
                   rng=np.random.default_rng(good))
    assert log3.success


def test_apply_correction_validation(key_lock):
    _, _, policy = key_lock
    corr = make_correction("key_lock", 1)
    with pytest.raises(ValidationError):
        apply_correction(policy, Correction("no_such_node", corr))
    with pytest.raises(KindMismatch):
        apply_correction(policy, Correction("phase00", corr))


def _arc_demo(span=0.6, n=40, radius=0.05):
    angles = np.linspace(0.0, span, n)
    wps = [Waypoint(0.01 * k,
                    Pose(rotation_about_axis(Z, a).quat,
                         np.array([radius * np.cos(a), radius * np.sin(a),
                                   0.0])),
                    0.0, Wrench())
           for k, a in enumerate(angles)]
    return Demonstration(waypoints=wps)


def test_refit_fragment_kind_mismatch():
    arc = _arc_demo()
    phase = MotionPhase(0, len(arc.waypoints), "in_contact")
    with pytest.raises(KindMismatch):
        _refit_fragment(arc, phase, "plane")
    line = Demonstration(waypoints=[
        Waypoint(0.01 * k, Pose(trans=np.array([0.001 * k, 0.0, 0.0])),
                 0.0, Wrench()) for k in range(30)])
    with pytest.raises(KindMismatch):
        _refit_fragment(line, MotionPhase(0, 30, "in_contact"), "rotation")


# ---------------------------------------------------------------------------
# persistence


def test_policy_json_round_trip(key_lock, tmp_path):
    _, _, policy = key_lock
    corrected = apply_correction(
        policy, Correction("phase01", make_correction("key_lock", 2)))
    path = tmp_path / "policy.json"
    save_policy(corrected, path)
    loaded = load_policy(path)
    assert [n.name for n in loaded.nodes] == [n.name for n in corrected.nodes]
    assert [n.kind for n in loaded.nodes] == [n.kind for n in corrected.nodes]
    for a, b in zip(loaded.nodes, corrected.nodes):
        assert a.expected_event == b.expected_event
        assert len(a.primitive.trajectory) == len(b.primitive.trajectory)
        assert np.isclose(a.primitive.wiggle, b.primitive.wiggle)
        if b.primitive.model is not None:
            assert np.allclose(a.primitive.model.axis, b.primitive.model.axis)
        if b.primitive.reference_cloud is not None:
            assert len(a.primitive.reference_cloud) == \
                len(b.primitive.reference_cloud)


def test_policy_json_keeps_gripper_actions():
    wps = [Waypoint(0.01 * k, Pose(trans=np.array([0.001 * k, 0.0, 0.02])),
                    0.0, Wrench()) for k in range(10)]
    node = PolicyNode("phase00", "free",
                      EcPrimitive(kind="free", trajectory=wps,
                                  gripper_actions=[(10, 1.0)],
                                  demo_entry=wps[0].pose),
                      "gripper_grasp")
    loaded = policy_from_json(policy_to_json(Policy(nodes=[node])))
    assert loaded.nodes[0].primitive.gripper_actions == [(10, 1.0)]
    assert loaded.nodes[0].expected_event == "gripper_grasp"


def test_correction_file_round_trip(tmp_path):
    corr = Correction("phase01", make_correction("key_lock", 1))
    path = tmp_path / "correction.json"
    save_correction(corr, path)
    loaded = load_correction(path)
    assert loaded.target == "phase01"
    assert len(loaded.demo.waypoints) == len(corr.demo.waypoints)
    assert loaded.demo.waypoints[3].pose.almost_equal(
        corr.demo.waypoints[3].pose, tol=1e-9)
