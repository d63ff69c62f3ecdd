"""Demonstration data model and file IO.

A demonstration file is UTF-8 line-delimited JSON, one waypoint per line:

    {"t": 0.01, "pose": [x, y, z, qw, qx, qy, qz], "g": 1.0,
     "wrench": [fx, fy, fz, tx, ty, tz], "frame": "board" | null}

Feature clouds referenced by waypoint "frame" ids live in sidecar files next
to the demo file, named ``<demo_stem>.features-<cloud_id>.json``:

    {"id": "board", "features": [{"p": [x, y, z], "d": [...]}, ...]}

Wrenches are expressed in the end-effector frame (wrist-sensor convention).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import ParseError, ValidationError
from .se3 import Pose, Wrench

# Transition event labels used on automaton edges and phase terminals.
EVENT_MAKING = "making_contact"
EVENT_BREAKING = "breaking_contact"
EVENT_NON_CONTACT = "non_contact"
EVENT_GRASP = "gripper_grasp"
EVENT_RELEASE = "gripper_release"
ALL_EVENTS = (EVENT_MAKING, EVENT_BREAKING, EVENT_NON_CONTACT,
              EVENT_GRASP, EVENT_RELEASE)


@dataclass
class Waypoint:
    t: float
    pose: Pose
    gripper: float
    wrench: Wrench
    feature_frame: Optional[str] = None


@dataclass
class FeatureCloud:
    """Point features with descriptors, expressed in one frame."""

    id: str
    positions: np.ndarray          # (n, 3)
    descriptors: np.ndarray        # (n, d)
    ids: np.ndarray = None         # (n,) int labels, defaults to 0..n-1
    scores: np.ndarray = None      # (n,) stability scores, default 1.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.descriptors = np.asarray(self.descriptors, dtype=float)
        if self.descriptors.ndim != 2 or len(self.descriptors) != len(self.positions):
            raise ValidationError("descriptor array must be (n, d) matching positions")
        if self.ids is None:
            self.ids = np.arange(len(self.positions))
        else:
            self.ids = np.asarray(self.ids, dtype=int).reshape(-1)
        if self.scores is None:
            self.scores = np.ones(len(self.positions))
        else:
            self.scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if not (len(self.ids) == len(self.scores) == len(self.positions)):
            raise ValidationError("feature cloud arrays disagree in length")

    def __len__(self) -> int:
        return len(self.positions)

    def subset(self, mask: np.ndarray) -> "FeatureCloud":
        return FeatureCloud(self.id, self.positions[mask], self.descriptors[mask],
                            self.ids[mask], self.scores[mask])

    def transformed(self, pose: Pose) -> "FeatureCloud":
        """Same features expressed through the rigid transform `pose`."""
        pts = (pose.rotation() @ self.positions.T).T + pose.trans
        return FeatureCloud(self.id, pts, self.descriptors.copy(),
                            self.ids.copy(), self.scores.copy())


@dataclass
class MotionPhase:
    """Half-open waypoint span [start, stop) with its labels."""

    start: int
    stop: int
    contact_label: str                      # "free" | "in_contact"
    ec_type: Optional[str] = None           # free_space|plane|translation|rotation
    model: Optional[Any] = None             # ConstraintModel once fitted
    terminal_event: Optional[str] = None
    reference_cloud_id: Optional[str] = None

    def __post_init__(self):
        if self.stop <= self.start:
            raise ValidationError(f"empty phase span [{self.start}, {self.stop})")
        if self.contact_label not in ("free", "in_contact"):
            raise ValidationError(f"bad contact label {self.contact_label!r}")

    def __len__(self) -> int:
        return self.stop - self.start


@dataclass
class Demonstration:
    waypoints: list[Waypoint]
    feature_clouds: dict[str, FeatureCloud] = field(default_factory=dict)
    truth: dict | None = None  # optional scripted ground truth for tests

    def __len__(self) -> int:
        return len(self.waypoints)

    def times(self) -> np.ndarray:
        return np.array([w.t for w in self.waypoints])

    def positions(self) -> np.ndarray:
        return np.array([w.pose.trans for w in self.waypoints])

    def quats(self) -> np.ndarray:
        return np.array([w.pose.quat for w in self.waypoints])

    def grippers(self) -> np.ndarray:
        return np.array([w.gripper for w in self.waypoints])

    def forces(self) -> np.ndarray:
        return np.array([w.wrench.force for w in self.waypoints])

    def force_norms(self) -> np.ndarray:
        return np.linalg.norm(self.forces(), axis=1)


def _parse_waypoint(obj: dict, lineno: int) -> Waypoint:
    try:
        t = float(obj["t"])
        pose_arr = obj["pose"]
        g = float(obj["g"])
        wrench_arr = obj["wrench"]
        frame = obj.get("frame")
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"line {lineno}: malformed waypoint ({e})") from e
    if not isinstance(pose_arr, list) or len(pose_arr) != 7:
        raise ParseError(f"line {lineno}: pose must be [x,y,z,qw,qx,qy,qz]")
    if not isinstance(wrench_arr, list) or len(wrench_arr) != 6:
        raise ParseError(f"line {lineno}: wrench must be [fx,fy,fz,tx,ty,tz]")
    if frame is not None and not isinstance(frame, str):
        raise ParseError(f"line {lineno}: frame must be a string or null")
    vals = np.array(pose_arr + wrench_arr + [t, g], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValidationError(f"line {lineno}: non-finite value")
    qnorm = np.linalg.norm(pose_arr[3:])
    if qnorm < 1e-6 or abs(qnorm - 1.0) > 1e-3:
        raise ValidationError(f"line {lineno}: quaternion norm {qnorm:.6f} not unit")
    if not (0.0 <= g <= 1.0):
        raise ValidationError(f"line {lineno}: gripper {g} outside [0, 1]")
    pose = Pose(np.array(pose_arr[3:]), np.array(pose_arr[:3]))
    wrench = Wrench(np.array(wrench_arr[:3]), np.array(wrench_arr[3:]))
    return Waypoint(t=t, pose=pose, gripper=g, wrench=wrench, feature_frame=frame)


def sidecar_path(demo_path: Path, cloud_id: str) -> Path:
    demo_path = Path(demo_path)
    return demo_path.with_name(f"{demo_path.stem}.features-{cloud_id}.json")


def load_feature_cloud(path: Path) -> FeatureCloud:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    try:
        cid = obj["id"]
        feats = obj["features"]
        pts = np.array([f["p"] for f in feats], dtype=float).reshape(-1, 3)
        desc = np.array([f["d"] for f in feats], dtype=float)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{path}: malformed feature cloud ({e})") from e
    if desc.ndim == 1:
        desc = desc.reshape(len(pts), -1)
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(desc)):
        raise ValidationError(f"{path}: non-finite feature data")
    return FeatureCloud(str(cid), pts, desc)


def save_feature_cloud(cloud: FeatureCloud, path: Path) -> None:
    obj = {
        "id": cloud.id,
        "features": [{"p": p.tolist(), "d": d.tolist()}
                     for p, d in zip(cloud.positions, cloud.descriptors)],
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True))


def load_demonstration(path: Path) -> Demonstration:
    """Load a line-delimited demo plus any referenced sidecar clouds."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e
    waypoints = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"line {lineno}: invalid JSON ({e})") from e
        if not isinstance(obj, dict):
            raise ParseError(f"line {lineno}: waypoint must be an object")
        waypoints.append(_parse_waypoint(obj, lineno))
    if not waypoints:
        raise ValidationError(f"{path}: no waypoints")
    times = [w.t for w in waypoints]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValidationError(f"{path}: timestamps not strictly increasing")
    clouds = {}
    for w in waypoints:
        if w.feature_frame and w.feature_frame not in clouds:
            sp = sidecar_path(path, w.feature_frame)
            if sp.exists():
                clouds[w.feature_frame] = load_feature_cloud(sp)
    return Demonstration(waypoints, clouds)


def save_demonstration(demo: Demonstration, path: Path) -> None:
    path = Path(path)
    lines = []
    for w in demo.waypoints:
        obj = {
            "t": w.t,
            "pose": w.pose.trans.tolist() + w.pose.quat.tolist(),
            "g": w.gripper,
            "wrench": w.wrench.as_vec6().tolist(),
            "frame": w.feature_frame,
        }
        lines.append(json.dumps(obj, sort_keys=True))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for cid, cloud in demo.feature_clouds.items():
        save_feature_cloud(cloud, sidecar_path(path, cid))


def phases_to_json(phases: list[MotionPhase]) -> list[dict]:
    """Serializable view of phases (models via their own to_json)."""
    out = []
    for ph in phases:
        out.append({
            "start": ph.start,
            "stop": ph.stop,
            "contact_label": ph.contact_label,
            "ec_type": ph.ec_type,
            "model": ph.model.to_json() if ph.model is not None else None,
            "terminal_event": ph.terminal_event,
            "reference_cloud_id": ph.reference_cloud_id,
        })
    return out


def phases_from_json(objs: list[dict]) -> list[MotionPhase]:
    from .constraint_fit import ConstraintModel
    phases = []
    for o in objs:
        try:
            ph = MotionPhase(
                start=int(o["start"]), stop=int(o["stop"]),
                contact_label=o["contact_label"],
                ec_type=o.get("ec_type"),
                model=ConstraintModel.from_json(o["model"]) if o.get("model") else None,
                terminal_event=o.get("terminal_event"),
                reference_cloud_id=o.get("reference_cloud_id"),
            )
        except (KeyError, TypeError) as e:
            raise ParseError(f"malformed phase record ({e})") from e
        phases.append(ph)
    return phases
