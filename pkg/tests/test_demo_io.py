"""Demo-file round trips and malformed-input rejection."""
import json

import numpy as np
import pytest

from ec_lfd.demo import (
    Demonstration,
    FeatureCloud,
    MotionPhase,
    Waypoint,
    load_demonstration,
    save_demonstration,
    load_feature_cloud,
    save_feature_cloud,
    sidecar_path,
    phases_to_json,
    phases_from_json,
)
from ec_lfd.errors import ParseError, ValidationError
from ec_lfd.se3 import Pose, Wrench


def make_demo(n=20, frame=None):
    rng = np.random.default_rng(0)
    wps = []
    for i in range(n):
        q = rng.normal(size=4)
        q = q / np.linalg.norm(q)
        wps.append(Waypoint(
            t=i * 0.01,
            pose=Pose(q, rng.uniform(-1, 1, size=3)),
            gripper=float(rng.uniform(0, 1)),
            wrench=Wrench(rng.normal(size=3), rng.normal(size=3)),
            feature_frame=frame if i == 3 else None,
        ))
    clouds = {}
    if frame:
        clouds[frame] = FeatureCloud(frame, rng.uniform(-1, 1, (8, 3)),
                                     rng.normal(size=(8, 16)))
    return Demonstration(wps, clouds)


def test_round_trip(tmp_path):
    demo = make_demo(25, frame="board")
    p = tmp_path / "demo.jsonl"
    save_demonstration(demo, p)
    back = load_demonstration(p)
    assert len(back) == 25
    for a, b in zip(demo.waypoints, back.waypoints):
        assert a.pose.almost_equal(b.pose, tol=1e-12)
        assert a.t == b.t
        assert a.gripper == b.gripper
        assert np.allclose(a.wrench.as_vec6(), b.wrench.as_vec6())
        assert a.feature_frame == b.feature_frame
    assert "board" in back.feature_clouds
    assert np.allclose(back.feature_clouds["board"].positions,
                       demo.feature_clouds["board"].positions)


def test_rejects_bad_json(tmp_path):
    p = tmp_path / "demo.jsonl"
    p.write_text("not json at all\n")
    with pytest.raises(ParseError):
        load_demonstration(p)


def test_rejects_short_wrench(tmp_path):
    p = tmp_path / "demo.jsonl"
    rec = {"t": 0.0, "pose": [0, 0, 0, 1, 0, 0, 0], "g": 1.0,
           "wrench": [0, 0, 0, 0, 0], "frame": None}
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ParseError):
        load_demonstration(p)


def test_rejects_missing_key(tmp_path):
    p = tmp_path / "demo.jsonl"
    rec = {"t": 0.0, "pose": [0, 0, 0, 1, 0, 0, 0], "g": 1.0}
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ParseError):
        load_demonstration(p)


def test_rejects_non_monotone_time(tmp_path):
    p = tmp_path / "demo.jsonl"
    rec = {"t": 0.0, "pose": [0, 0, 0, 1, 0, 0, 0], "g": 1.0,
           "wrench": [0, 0, 0, 0, 0, 0], "frame": None}
    lines = [json.dumps(rec)]
    rec2 = dict(rec); rec2["t"] = 0.0
    lines.append(json.dumps(rec2))
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValidationError):
        load_demonstration(p)


def test_rejects_non_unit_quaternion(tmp_path):
    p = tmp_path / "demo.jsonl"
    rec = {"t": 0.0, "pose": [0, 0, 0, 2.0, 0, 0, 0], "g": 1.0,
           "wrench": [0, 0, 0, 0, 0, 0], "frame": None}
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ValidationError):
        load_demonstration(p)


def test_rejects_non_finite(tmp_path):
    p = tmp_path / "demo.jsonl"
    rec = {"t": 0.0, "pose": [0, 0, 0, 1, 0, 0, 0], "g": float("nan"),
           "wrench": [0, 0, 0, 0, 0, 0], "frame": None}
    p.write_text(json.dumps(rec) + "\n")
    with pytest.raises(ValidationError):
        load_demonstration(p)


def test_feature_cloud_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    cloud = FeatureCloud("lock", rng.uniform(-1, 1, (5, 3)), rng.normal(size=(5, 16)))
    p = tmp_path / "x.features-lock.json"
    save_feature_cloud(cloud, p)
    back = load_feature_cloud(p)
    assert back.id == "lock"
    assert np.allclose(back.positions, cloud.positions)
    assert np.allclose(back.descriptors, cloud.descriptors)
    assert np.allclose(back.scores, 1.0)


def test_sidecar_naming(tmp_path):
    assert sidecar_path(tmp_path / "run1.jsonl", "board").name == "run1.features-board.json"


def test_cloud_transform_and_subset():
    pts = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    cloud = FeatureCloud("c", pts, np.eye(2))
    moved = cloud.transformed(Pose(np.array([1, 0, 0, 0]), np.array([0, 0, 1.0])))
    assert np.allclose(moved.positions, pts + [0, 0, 1.0])
    sub = cloud.subset(np.array([True, False]))
    assert len(sub) == 1 and sub.ids[0] == 0


def test_phase_validation():
    with pytest.raises(ValidationError):
        MotionPhase(5, 5, "free")
    with pytest.raises(ValidationError):
        MotionPhase(0, 3, "contact")  # not a legal label
    ph = MotionPhase(0, 10, "in_contact")
    assert len(ph) == 10


def test_phases_json_round_trip():
    from ec_lfd.constraint_fit import ConstraintModel
    model = ConstraintModel("plane", np.array([0, 0, 1.0]), np.zeros(3), 0.0)
    phases = [
        MotionPhase(0, 10, "free", ec_type="free_space", reference_cloud_id="board"),
        MotionPhase(10, 30, "in_contact", ec_type="plane", model=model,
                    terminal_event="breaking_contact"),
    ]
    back = phases_from_json(phases_to_json(phases))
    assert back[0].reference_cloud_id == "board"
    assert back[1].model.kind == "plane"
    assert back[1].terminal_event == "breaking_contact"
    assert (back[0].start, back[0].stop) == (0, 10)
