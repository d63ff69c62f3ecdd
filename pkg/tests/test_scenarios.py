import numpy as np
import pytest

from ec_lfd.errors import UnknownScenario, ValidationError
from ec_lfd.scenarios import SCENARIO_NAMES, make_correction, make_scenario
from ec_lfd.segmentation import segment

ALL_BUILDS = [
    ("puzzle", {"variant": "A"}),
    ("puzzle", {"variant": "B"}),
    ("puzzle", {"variant": "C"}),
    ("key_lock", {"variant": 1}),
    ("key_lock", {"variant": 2}),
    ("coffee", None),
    ("latch", None),
    ("drawer", None),
    ("fmb_insert", None),
    ("one_leg", None),
]


@pytest.fixture(scope="module")
def built():
    out = {}
    for name, params in ALL_BUILDS:
        world, demo = make_scenario(name, params=params, seed=0)
        out[(name, str(params))] = (world, demo, segment(demo))
    return out


def test_all_scenarios_listed():
    assert set(SCENARIO_NAMES) == {name for name, _ in ALL_BUILDS}


@pytest.mark.parametrize("name,params", ALL_BUILDS)
def test_phase_count_matches_truth(built, name, params):
    _, demo, phases = built[(name, str(params))]
    assert len(phases) == len(demo.truth["phases"])


@pytest.mark.parametrize("name,params", ALL_BUILDS)
def test_contact_labels_match_truth(built, name, params):
    _, demo, phases = built[(name, str(params))]
    want = [p["contact"] for p in demo.truth["phases"]]
    assert [p.contact_label for p in phases] == want


@pytest.mark.parametrize("name,params", ALL_BUILDS)
def test_boundaries_near_marks(built, name, params):
    _, demo, phases = built[(name, str(params))]
    marks = demo.truth["boundaries"]
    bounds = [p.start for p in phases[1:]]
    assert len(bounds) == len(marks)
    for b, m in zip(bounds, marks):
        assert abs(b - m) <= 10


@pytest.mark.parametrize("name,params", ALL_BUILDS)
def test_phases_partition_recording(built, name, params):
    _, demo, phases = built[(name, str(params))]
    assert phases[0].start == 0
    assert phases[-1].stop == len(demo)
    for a, b in zip(phases[:-1], phases[1:]):
        assert a.stop == b.start


def test_expected_phase_counts(built):
    counts = {
        ("puzzle", "A"): 7,
        ("key_lock", 1): 3,
        ("coffee", None): 3,
        ("latch", None): 5,
        ("drawer", None): 3,
        ("fmb_insert", None): 6,
        ("one_leg", None): 5,
    }
    for (name, v), n in counts.items():
        params = None if v is None else {"variant": v}
        _, demo, phases = built[(name, str(params))]
        assert len(phases) == n, name


def test_fmb_has_four_free_and_two_contact(built):
    _, _, phases = built[("fmb_insert", "None")]
    labels = [p.contact_label for p in phases]
    assert labels.count("free") == 4
    assert labels.count("in_contact") == 2


def test_truth_events_are_closed_set(built):
    allowed = {"making_contact", "breaking_contact", "non_contact",
               "gripper_grasp", "gripper_release"}
    for _, demo, _ in built.values():
        for ph in demo.truth["phases"]:
            assert ph["event"] in allowed


def test_same_seed_reproduces_recording(built):
    _, demo, _ = built[("coffee", "None")]
    _, again = make_scenario("coffee", seed=0)
    assert len(demo) == len(again)
    for a, b in zip(demo.waypoints, again.waypoints):
        assert a.pose.almost_equal(b.pose)
        np.testing.assert_array_equal(a.wrench.as_vec6(), b.wrench.as_vec6())


def test_seed_changes_noise_not_path(built):
    _, demo, _ = built[("coffee", "None")]
    _, other = make_scenario("coffee", seed=3)
    assert len(demo) == len(other)
    for a, b in zip(demo.waypoints, other.waypoints):
        assert a.pose.almost_equal(b.pose)
    wa = np.array([w.wrench.as_vec6() for w in demo.waypoints])
    wb = np.array([w.wrench.as_vec6() for w in other.waypoints])
    assert np.abs(wa - wb).max() > 0


def test_lock_variants_share_identical_cloud(built):
    w1, d1, _ = built[("key_lock", str({'variant': 1}))]
    w2, d2, _ = built[("key_lock", str({'variant': 2}))]
    np.testing.assert_array_equal(
        w1.feature_clouds["scene"].positions,
        w2.feature_clouds["scene"].positions)
    np.testing.assert_array_equal(
        d1.feature_clouds["scene"].positions,
        d2.feature_clouds["scene"].positions)


def test_lock_variant_two_displaces_keyhole(built):
    w1, _, _ = built[("key_lock", str({'variant': 1}))]
    w2, _, _ = built[("key_lock", str({'variant': 2}))]
    kh1 = w1.region("keyhole").geometry["center"]
    kh2 = w2.region("keyhole").geometry["center"]
    np.testing.assert_allclose(kh2 - kh1, [0.04, 0.03, 0.0], atol=1e-12)
    np.testing.assert_allclose(w2.anchor, kh2, atol=1e-12)


def test_maze_variants_share_identical_cloud(built):
    wa, _, _ = built[("puzzle", str({'variant': 'A'}))]
    wc, _, _ = built[("puzzle", str({'variant': 'C'}))]
    np.testing.assert_array_equal(
        wa.feature_clouds["scene"].positions,
        wc.feature_clouds["scene"].positions)


def test_maze_variant_geometry(built):
    wa, _, _ = built[("puzzle", str({'variant': 'A'}))]
    wc, _, _ = built[("puzzle", str({'variant': 'C'}))]
    assert wa.region("shaft").geometry["length"] == pytest.approx(0.03)
    assert wc.region("shaft").geometry["length"] == pytest.approx(0.035)
    assert wa.region("arc1").geometry["psi_range"][1] == pytest.approx(np.pi / 2)
    assert wc.region("arc1").geometry["psi_range"][1] == pytest.approx(1.5 * np.pi)


def test_free_waypoints_carry_feature_frame(built):
    for key in (("puzzle", str({'variant': 'A'})), ("coffee", "None")):
        _, demo, phases = built[key]
        first_contact = phases[1].start
        frames = [w.feature_frame for w in demo.waypoints]
        # approach is annotated with the scene cloud, contact is not
        assert frames[0] == "scene"
        assert all(f is None for f in frames[first_contact + 1:])


def test_gripper_trace_matches_truth_events():
    _, demo = make_scenario("fmb_insert")
    g = demo.grippers()
    flips = int(np.sum(np.abs(np.diff((g > 0.5).astype(int)))))
    assert flips == 3  # grasp, release, regrasp


def test_unknown_scenario_raises():
    with pytest.raises(UnknownScenario):
        make_scenario("peg_in_hole")


def test_bad_variant_raises():
    with pytest.raises(ValidationError):
        make_scenario("puzzle", params={"variant": "D"})
    with pytest.raises(ValidationError):
        make_scenario("key_lock", params={"variant": 3})


def test_correction_fragments_segment_to_press_slide():
    for stage in (1, 2):
        frag = make_correction("key_lock", stage)
        phases = segment(frag)
        assert [p.contact_label for p in phases] == ["free", "in_contact"]


def test_correction_stage_two_adds_yaw_weave():
    still = make_correction("key_lock", 1)
    weave = make_correction("key_lock", 2)

    def max_yaw(demo):
        return max(2 * np.arcsin(min(1.0, abs(w.pose.quat[3])))
                   for w in demo.waypoints)

    assert max_yaw(still) < np.deg2rad(1.0)
    assert max_yaw(weave) > np.deg2rad(4.0)


def test_correction_rejects_unknown_target():
    with pytest.raises(UnknownScenario):
        make_correction("coffee", 1)
    with pytest.raises(ValidationError):
        make_correction("key_lock", 3)


def test_demo_clouds_attached(built):
    for _, demo, _ in built.values():
        assert "scene" in demo.feature_clouds
        assert len(demo.feature_clouds["scene"]) == 40
