"""Scripted benchmark scenes with kinesthetic-style demonstrations.

Each scenario builds a quasi-static contact world (boards with holes and
channels, levers, drawers, latches) and drives a scripted end-effector
through it, recording realized poses and noisy wrenches at 100 Hz.  The
recordings double as regression fixtures: every scene is designed so the
segmenter recovers a known phase structure, which ships on the returned
demonstration under ``demo.truth``.

Conventions shared by all scripts:

- command ticks at 1 kHz, one recorded waypoint every 10 ticks,
- free-flight moves at 0.08 m/s, in-contact moves at 0.02 m/s,
- contact is made legible to the segmenter by biasing the commanded pose
  1.5e-4 m into the constraint (15 N against the default 1e5 N/m walls),
- dwells of ~0.15 s separate same-contact phases so the zero-velocity
  refinement can find the seams,
- wrench recordings carry N(0, 0.2) force and N(0, 0.02) torque noise.
"""

import numpy as np

from .demo import (
    EVENT_BREAKING,
    EVENT_GRASP,
    EVENT_MAKING,
    EVENT_RELEASE,
    Demonstration,
    FeatureCloud,
    Waypoint,
)
from .errors import UnknownScenario, ValidationError
from .se3 import Pose, Twist, Wrench, exp_map, log_map, rotation_about_axis
from .world import (
    ConstraintWorld,
    EcRegion,
    initial_state,
    observe,
    set_gripper,
    world_step,
)

SCENARIO_NAMES = (
    "puzzle",
    "key_lock",
    "coffee",
    "latch",
    "drawer",
    "fmb_insert",
    "one_leg",
)

_Z = np.array([0.0, 0.0, 1.0])
_CONTACT_BIAS = 1.5e-4
_CLOUD_SEED = 7


def _rotz(angle: float) -> np.ndarray:
    return rotation_about_axis(_Z, angle).quat


class _Script:
    """Drives commanded poses through the world and records a demo.

    The recorded trajectory is the realized pose, as a kinesthetic teacher
    would log it, while the commanded pose is what presses against the
    constraints and generates the reaction wrench.
    """

    def __init__(self, world, start, gripper=0.0, seed=0, dt=1e-3,
                 record_every=10, frame_on=None):
        self.world = world
        self.dt = float(dt)
        self.every = int(record_every)
        self.rng = np.random.default_rng(seed)
        self.sim = initial_state(start, gripper=gripper)
        self.cmd = start.copy()
        self.tick = 0
        self.waypoints = []
        self.marks = []
        self.frame_on = frame_on
        self._wrench = Wrench(np.zeros(3), np.zeros(3))
        self._record()

    def _record(self):
        f = self._wrench.force + self.rng.normal(0.0, 0.2, 3)
        tau = self._wrench.torque + self.rng.normal(0.0, 0.02, 3)
        self.waypoints.append(Waypoint(
            t=self.tick * self.dt,
            pose=self.sim.ee_pose.copy(),
            gripper=self.sim.gripper,
            wrench=Wrench(f, tau),
            feature_frame=self.frame_on,
        ))

    def _step(self, cmd_pose: Pose):
        self.cmd = cmd_pose
        self.sim, self._wrench = world_step(self.world, self.sim, cmd_pose, self)
        self.tick += 1
        if self.tick % self.every == 0:
            self._record()

    def goto(self, pos=None, quat=None, speed=0.08, ang_speed=1.2):
        """Screw-interpolate the commanded pose to a target."""
        target = Pose(
            np.asarray(quat, dtype=float) if quat is not None else self.cmd.quat.copy(),
            np.asarray(pos, dtype=float) if pos is not None else self.cmd.trans.copy(),
        )
        delta = log_map(self.cmd.inverse() @ target)
        lin = np.linalg.norm(delta.linear)
        ang = np.linalg.norm(delta.angular)
        n = max(int(np.ceil(max(lin / speed, ang / ang_speed) / self.dt)), 1)
        start = self.cmd.copy()
        for i in range(1, n + 1):
            frac = i / n
            step = Twist(angular=delta.angular * frac, linear=delta.linear * frac)
            self._step(start @ exp_map(step))

    def sweep(self, center, axis, r0_dir, radius, psi0, psi1, omega=0.35,
              yaw0=0.0, track=True):
        """Command an arc about ``axis`` while optionally tracking yaw."""
        center = np.asarray(center, dtype=float)
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        e1 = np.asarray(r0_dir, dtype=float)
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(axis, e1)
        n = max(int(np.ceil(abs(psi1 - psi0) / omega / self.dt)), 1)
        for i in range(1, n + 1):
            psi = psi0 + (psi1 - psi0) * i / n
            pos = center + radius * (np.cos(psi) * e1 + np.sin(psi) * e2)
            yaw = yaw0 + (psi - psi0 if track else 0.0)
            self._step(Pose(rotation_about_axis(axis, yaw).quat, pos))

    def dwell(self, duration=0.15):
        for _ in range(int(round(duration / self.dt))):
            self._step(self.cmd.copy())

    def settle(self, bias=None):
        """Snap the command onto the realized pose, keeping a contact bias.

        Used after a mechanism hand-off pops the realized pose away from
        the command, the way a person relaxes into a detent.
        """
        pose = self.sim.ee_pose.copy()
        if bias is not None:
            pose = Pose(pose.quat, pose.trans + np.asarray(bias, dtype=float))
        self._step(pose)

    def gripper(self, g: float):
        self.sim = set_gripper(self.world, self.sim, g)
        self._step(self.cmd.copy())

    def mark(self):
        """Record the index of the next waypoint as a phase boundary."""
        self.marks.append(len(self.waypoints))

    def demonstration(self, clouds, truth=None) -> Demonstration:
        return Demonstration(waypoints=list(self.waypoints),
                             feature_clouds=dict(clouds), truth=truth)


def _scene_cloud(rng, lo, hi, n=40, descriptor_dim=16) -> FeatureCloud:
    positions = rng.uniform(np.asarray(lo, dtype=float),
                            np.asarray(hi, dtype=float), (n, 3))
    descriptors = rng.normal(0.0, 1.0, (n, descriptor_dim))
    descriptors /= np.linalg.norm(descriptors, axis=1, keepdims=True)
    return FeatureCloud(id="scene", positions=positions, descriptors=descriptors)


def _plane(rid, point, normal, tangent, half, stiffness=1e5):
    return EcRegion(id=rid, kind="plane_surface", geometry={
        "point": np.asarray(point, dtype=float),
        "normal": np.asarray(normal, dtype=float),
        "tangent": np.asarray(tangent, dtype=float),
        "half_extents": np.asarray(half, dtype=float),
    }, stiffness=stiffness)


def _hole(rid, center, axis, radius, next_id, window=0.006, yaw_tol=None,
          stiffness=1e5, requires_grasp=False):
    geo = {
        "center": np.asarray(center, dtype=float),
        "axis": np.asarray(axis, dtype=float),
        "radius": float(radius),
        "axial_window": float(window),
        "entry_quat": np.array([1.0, 0.0, 0.0, 0.0]),
        "next_id": next_id,
    }
    if yaw_tol is not None:
        geo["yaw_tol_deg"] = float(yaw_tol)
    return EcRegion(id=rid, kind="hole", geometry=geo, stiffness=stiffness,
                    requires_grasp=requires_grasp)


def _channel(rid, entry, axis, length, stiffness=1e5, friction=0.0, **geo):
    base = {
        "entry": np.asarray(entry, dtype=float),
        "axis": np.asarray(axis, dtype=float),
        "length": float(length),
    }
    base.update(geo)
    return EcRegion(id=rid, kind="prismatic_channel", geometry=base,
                    stiffness=stiffness, friction_coeff=friction)


def _revolute(rid, center, axis, r0, psi_range, coupled, stiffness=1e5,
              ang_stiffness=50.0, **geo):
    base = {
        "center": np.asarray(center, dtype=float),
        "axis": np.asarray(axis, dtype=float),
        "r0": np.asarray(r0, dtype=float),
        "psi_range": (float(psi_range[0]), float(psi_range[1])),
        "orientation_coupled": bool(coupled),
        "base_quat": np.array([1.0, 0.0, 0.0, 0.0]),
    }
    base.update(geo)
    return EcRegion(id=rid, kind="revolute_joint", geometry=base,
                    stiffness=stiffness, ang_stiffness=ang_stiffness)


def _contact_phase(ec, event):
    return {"contact": "in_contact", "ec": ec, "event": event}


def _free_phase(event):
    return {"contact": "free", "ec": "free_space", "event": event}


# ---------------------------------------------------------------------------
# peg maze


def _puzzle(params, seed):
    variant = (params or {}).get("variant", "A")
    if variant not in ("A", "B", "C"):
        raise ValidationError(f"unknown maze variant {variant!r}")
    shaft_len = {"A": 0.03, "B": 0.04, "C": 0.035}[variant]
    arc1_span = 1.5 * np.pi if variant == "C" else 0.5 * np.pi

    mouth = np.array([0.05, 0.03, 0.0])
    bottom = mouth - shaft_len * _Z
    c1 = bottom + np.array([-0.03, 0.0, 0.0])
    r1 = bottom - c1
    e1c = np.cross(_Z, r1)
    arc1_end = c1 + np.cos(arc1_span) * r1 + np.sin(arc1_span) * e1c
    d1 = -np.sin(arc1_span) * r1 + np.cos(arc1_span) * e1c
    d1 = d1 / np.linalg.norm(d1)
    gal1_end = arc1_end + 0.06 * d1
    c2 = gal1_end + 0.03 * np.cross(_Z, d1)
    r2 = gal1_end - c2
    arc2_end = c2 + np.cross(_Z, r2)
    d2 = -r2 / np.linalg.norm(r2)
    yaw1 = arc1_span
    yaw2 = arc1_span + 0.5 * np.pi
    slack = 0.44

    regions = [
        _plane("board", [0.0, 0.0, 0.0], _Z, [1.0, 0.0, 0.0], [0.15, 0.15]),
        _hole("mouth", mouth, -_Z, 5e-4, next_id="shaft"),
        _channel("shaft", mouth, -_Z, shaft_len, next_id="arc1",
                 yaw_axis=_Z.copy(), yaw_center=0.0, yaw_slack=slack,
                 lateral_tol=5e-4),
        _revolute("arc1", c1, _Z, r1, (0.0, arc1_span), coupled=False,
                  yaw_slack=slack, next_high="gal1"),
        _channel("gal1", arc1_end, d1, 0.06, next_id="arc2",
                 yaw_axis=_Z.copy(), yaw_center=0.0, yaw_slack=slack,
                 base_quat=_rotz(yaw1)),
        _revolute("arc2", c2, _Z, r2, (0.0, 0.5 * np.pi), coupled=False,
                  yaw_slack=slack, base_quat=_rotz(yaw1), next_high="gal2"),
        _channel("gal2", arc2_end, d2, 0.05,
                 yaw_axis=_Z.copy(), yaw_center=0.0, yaw_slack=slack,
                 base_quat=_rotz(yaw2)),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED),
                         [-0.12, -0.08, 0.0], [0.15, 0.15, 0.08])
    world = ConstraintWorld(regions=regions, feature_clouds={"scene": cloud},
                            anchor=mouth.copy())

    b = _CONTACT_BIAS
    s = _Script(world, Pose(trans=np.array([0.02, 0.03, 0.05])), gripper=1.0,
                seed=seed, frame_on="scene")
    s.goto(pos=[0.02, 0.03, 0.004], speed=0.08)
    s.goto(pos=[0.02, 0.03, 0.0], speed=0.02)
    s.frame_on = None
    s.mark()
    s.goto(pos=[0.02, 0.03, -b], speed=0.005)
    s.goto(pos=[mouth[0], mouth[1], -b], speed=0.02)
    s.dwell(0.04)
    s.mark()
    s.dwell(0.04)
    s.goto(pos=[mouth[0] + b, mouth[1], -b], speed=0.005)
    s.goto(pos=[mouth[0] + b, mouth[1], -shaft_len - 3e-4], speed=0.02)
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.sweep(c1, _Z, r1, 0.03 - b, 0.0, arc1_span, omega=0.35, yaw0=0.0)
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    lat1 = np.cross(_Z, d1)
    s.goto(pos=gal1_end + b * lat1, speed=0.02)
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.sweep(c2, _Z, r2, 0.03 - b, 0.0, 0.5 * np.pi, omega=0.35, yaw0=yaw1)
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    lat2 = np.cross(_Z, d2)
    s.goto(pos=arc2_end + 0.05 * d2 + b * lat2, speed=0.02)
    s.dwell(0.2)

    truth = {
        "scenario": "puzzle",
        "variant": variant,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_MAKING),
            _contact_phase("plane", EVENT_BREAKING),
            _contact_phase("translation", EVENT_MAKING),
            _contact_phase("rotation", EVENT_MAKING),
            _contact_phase("translation", EVENT_MAKING),
            _contact_phase("rotation", EVENT_MAKING),
            _contact_phase("translation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        Pose(trans=np.array([0.02, 0.03, 0.05])), gripper=1.0))}, truth)
    return world, demo


# ---------------------------------------------------------------------------
# key and lock


def _key_lock_world(variant):
    keyhole = np.array([0.30, 0.0, 0.0])
    if variant == 2:
        keyhole = keyhole + np.array([0.04, 0.03, 0.0])
    regions = [
        _plane("face", [0.30, 0.0, 0.0], _Z, [1.0, 0.0, 0.0], [0.08, 0.08]),
        _hole("keyhole", keyhole, -_Z, 1e-3, next_id="keyway", yaw_tol=4.0),
        _channel("keyway", keyhole, -_Z, 0.025,
                 yaw_axis=_Z.copy(), yaw_center=0.0, yaw_slack=0.07),
    ]
    # the feature cloud is fixed to the door, not the lock plate, so a
    # displaced plate leaves the features where they were
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 1),
                         [0.18, -0.12, 0.0], [0.42, 0.12, 0.10])
    rng = np.random.default_rng(_CLOUD_SEED + 2)
    unstable = {int(i): rng.uniform(-0.05, 0.05, 3)
                for i in range(34, 40)}
    world = ConstraintWorld(regions=regions, feature_clouds={"scene": cloud},
                            unstable_offsets=unstable, anchor=keyhole.copy())
    return world, keyhole


def _key_lock(params, seed):
    variant = int((params or {}).get("variant", 1))
    if variant not in (1, 2):
        raise ValidationError(f"unknown lock variant {variant!r}")
    world, keyhole = _key_lock_world(variant)

    b = _CONTACT_BIAS
    press = keyhole - np.array([0.03, 0.0, 0.0])
    start = Pose(trans=np.array([0.20, 0.0, 0.08]))
    s = _Script(world, start, gripper=1.0, seed=seed, frame_on="scene")
    s.goto(pos=[press[0], press[1], 0.004], speed=0.08)
    s.goto(pos=[press[0], press[1], 0.0], speed=0.02)
    s.frame_on = None
    s.mark()
    s.goto(pos=[press[0], press[1], -b], speed=0.005)
    s.goto(pos=[keyhole[0], keyhole[1], -b], speed=0.02)
    s.dwell(0.04)
    s.mark()
    s.dwell(0.04)
    s.goto(pos=[keyhole[0] + b, keyhole[1], -b], speed=0.005)
    s.goto(pos=[keyhole[0] + b, keyhole[1], -0.025], speed=0.02)
    s.dwell(0.2)

    truth = {
        "scenario": "key_lock",
        "variant": variant,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_MAKING),
            _contact_phase("plane", EVENT_BREAKING),
            _contact_phase("translation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=1.0))}, truth)
    return world, demo


def make_correction(name, stage, seed=0) -> Demonstration:
    """Scripted recovery fragment for a failed lock insertion.

    Stage 1 is a plain press-and-slide onto the displaced keyhole with no
    feature annotations, so it replays at its recorded coordinates.  Stage
    2 repeats it with a +-6 degree yaw weave so the key finds a misaligned
    keyway gate.
    """
    if name != "key_lock":
        raise UnknownScenario(f"no correction fragments for {name!r}")
    if stage not in (1, 2):
        raise ValidationError(f"unknown correction stage {stage!r}")
    world, keyhole = _key_lock_world(2)
    b = _CONTACT_BIAS
    press = keyhole - np.array([0.025, 0.0, 0.0])
    s = _Script(world, Pose(trans=press + np.array([0.0, 0.0, 0.03])),
                gripper=1.0, seed=1000 + seed)
    s.goto(pos=[press[0], press[1], 0.0], speed=0.04)
    s.mark()
    s.goto(pos=[press[0], press[1], -b], speed=0.005)
    if stage == 1:
        s.goto(pos=[keyhole[0], keyhole[1], -b], speed=0.01)
    else:
        start = s.cmd.trans.copy()
        n = int(np.ceil(0.025 / 0.01 / s.dt))
        for i in range(1, n + 1):
            frac = i / n
            pos = start + frac * (np.array([keyhole[0], keyhole[1], -b]) - start)
            yaw = np.deg2rad(6.0) * np.sin(2 * np.pi * 0.4 * i * s.dt)
            s._step(Pose(_rotz(yaw), pos))
    s.dwell(0.1)
    return s.demonstration({}, truth={"scenario": "key_lock",
                                      "correction_stage": stage,
                                      "boundaries": list(s.marks)})


# ---------------------------------------------------------------------------
# lever press


def _coffee(params, seed):
    lever_center = np.array([0.30, 0.20, 0.12])
    socket = lever_center + np.array([0.12, 0.0, 0.0])
    regions = [
        _plane("top", [0.33, 0.20, 0.12], _Z, [1.0, 0.0, 0.0], [0.10, 0.06],
               stiffness=2000.0),
        _hole("socket", socket, -_Z, 0.006, next_id="lever", window=0.010,
              stiffness=2000.0),
        _revolute("lever", lever_center, _Z, [0.12, 0.0, 0.0],
                  (0.0, 0.873), coupled=True, stiffness=1000.0,
                  ang_stiffness=4.0),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 3),
                         [0.20, 0.10, 0.10], [0.46, 0.30, 0.22])
    world = ConstraintWorld(regions=regions, feature_clouds={"scene": cloud},
                            anchor=socket.copy())

    press = np.array([0.39, 0.20])
    start = Pose(trans=np.array([0.30, 0.20, 0.20]))
    s = _Script(world, start, gripper=1.0, seed=seed, frame_on="scene")
    s.goto(pos=[press[0], press[1], 0.126], speed=0.08)
    s.goto(pos=[press[0], press[1], 0.1155], speed=0.02)
    s.frame_on = None
    s.mark()
    s.goto(pos=[press[0], press[1], 0.1145], speed=0.02)
    s.goto(pos=[press[0], press[1], 0.114], speed=0.005)
    s.goto(pos=[socket[0], socket[1], 0.114], speed=0.02)
    s.dwell(0.04)
    s.mark()
    s.dwell(0.04)
    s.sweep(lever_center, _Z, [1.0, 0.0, 0.0], 0.12 - 0.015, 0.0, 0.873,
            omega=0.25, yaw0=0.0)
    s.dwell(0.2)

    truth = {
        "scenario": "coffee",
        "variant": 1,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_MAKING),
            _contact_phase("plane", EVENT_MAKING),
            _contact_phase("rotation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=1.0))}, truth)
    return world, demo


# ---------------------------------------------------------------------------
# slide latch


def _latch(params, seed):
    knob = np.array([0.50, 0.10, 0.15])
    pop = 0.01
    ch1_end = knob + np.array([0.0, 0.0, 0.03])
    ch2_entry = ch1_end + np.array([-pop, 0.0, 0.0])
    ch2_end = ch2_entry + np.array([-0.06, 0.0, 0.0])
    ch3_entry = ch2_end + np.array([0.0, 0.0, -pop])
    ch3_end = ch3_entry + np.array([0.0, 0.0, -0.03])
    ch4_entry = ch3_end + np.array([0.0, -pop, 0.0])
    ch4_end = ch4_entry + np.array([0.0, -0.05, 0.0])
    regions = [
        _channel("ch1", knob, _Z, 0.03, friction=0.3, next_id="ch2",
                 pop=np.array([-pop, 0.0, 0.0]), release_at_start=False),
        _channel("ch2", ch2_entry, [-1.0, 0.0, 0.0], 0.06, friction=0.3,
                 next_id="ch3", pop=np.array([0.0, 0.0, -pop]),
                 release_at_start=False),
        _channel("ch3", ch3_entry, -_Z, 0.03, friction=0.3, next_id="ch4",
                 pop=np.array([0.0, -pop, 0.0]), release_at_start=False),
        _channel("ch4", ch4_entry, [0.0, -1.0, 0.0], 0.05, friction=0.3,
                 release_at_start=False),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 4),
                         [0.36, -0.04, 0.08], [0.58, 0.20, 0.26])
    world = ConstraintWorld(
        regions=regions, feature_clouds={"scene": cloud},
        grasp_frames={"knob": Pose(trans=knob.copy())},
        grasp_links={"knob": "ch1"},
        anchor=knob.copy(), slip_per_phase_deg=3.0)

    b = _CONTACT_BIAS
    start = Pose(trans=np.array([0.42, 0.04, 0.22]))
    s = _Script(world, start, gripper=0.0, seed=seed, frame_on="scene")
    s.goto(pos=knob + np.array([0.0, 0.0, 0.03]), speed=0.08)
    s.goto(pos=knob, speed=0.04)
    s.dwell(0.05)
    s.frame_on = None
    s.mark()
    s.gripper(1.0)
    s.settle(bias=[b, 0.0, 0.0])
    s.dwell(0.05)
    s.goto(pos=ch1_end + np.array([b, 0.0, 5e-4]), speed=0.02)
    s.settle(bias=[0.0, 0.0, b])
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.goto(pos=ch2_end + np.array([-5e-4, 0.0, b]), speed=0.02)
    s.settle(bias=[b, 0.0, 0.0])
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.goto(pos=ch3_end + np.array([b, 0.0, -5e-4]), speed=0.02)
    s.settle(bias=[0.0, 0.0, b])
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.goto(pos=ch4_end + np.array([0.0, 0.0, b]), speed=0.02)
    s.dwell(0.2)

    truth = {
        "scenario": "latch",
        "variant": 1,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_GRASP),
            _contact_phase("translation", EVENT_BREAKING),
            _contact_phase("translation", EVENT_BREAKING),
            _contact_phase("translation", EVENT_BREAKING),
            _contact_phase("translation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=0.0))}, truth)
    return world, demo


# ---------------------------------------------------------------------------
# spring drawer


def _drawer(params, seed):
    handle = np.array([0.60, -0.20, 0.20])
    push_end = handle + np.array([0.035, 0.0, 0.0])
    slide_entry = push_end + np.array([-0.012, 0.0, 0.0])
    regions = [
        _channel("push", handle, [1.0, 0.0, 0.0], 0.035, friction=0.3,
                 one_way=True, next_id="slide",
                 pop=np.array([-0.012, 0.0, 0.0])),
        _channel("slide", slide_entry, [-1.0, 0.0, 0.0], 0.12, friction=0.3,
                 release_at_start=False),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 5),
                         [0.48, -0.34, 0.10], [0.72, -0.06, 0.30])
    world = ConstraintWorld(
        regions=regions, feature_clouds={"scene": cloud},
        grasp_frames={"handle": Pose(trans=handle.copy())},
        grasp_links={"handle": "push"},
        anchor=handle.copy(), slip_per_phase_deg=3.0)

    b = _CONTACT_BIAS
    start = Pose(trans=np.array([0.55, -0.15, 0.26]))
    s = _Script(world, start, gripper=0.0, seed=seed, frame_on="scene")
    s.goto(pos=handle + np.array([0.0, 0.0, 0.03]), speed=0.08)
    s.goto(pos=handle, speed=0.04)
    s.dwell(0.05)
    s.frame_on = None
    s.mark()
    s.gripper(1.0)
    s.settle(bias=[0.0, b, 0.0])
    s.dwell(0.05)
    s.goto(pos=push_end + np.array([5e-4, b, 0.0]), speed=0.02)
    s.settle(bias=[0.0, b, 0.0])
    s.dwell(0.07)
    s.mark()
    s.dwell(0.08)
    s.goto(pos=slide_entry + np.array([-0.08, b, 0.0]), speed=0.02)
    s.dwell(0.2)

    truth = {
        "scenario": "drawer",
        "variant": 1,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_GRASP),
            _contact_phase("translation", EVENT_BREAKING),
            _contact_phase("translation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=0.0))}, truth)
    return world, demo


# ---------------------------------------------------------------------------
# beam insertion with a regrasp


def _fmb_insert(params, seed):
    slot = np.array([0.43, 0.33, 0.0])
    grip1 = np.array([0.15, 0.10, 0.05])
    setdown = np.array([0.22, 0.17, 0.04])
    grip2 = np.array([0.25, 0.20, 0.02])
    press = np.array([0.40, 0.30])
    regions = [
        _plane("board", [0.40, 0.30, 0.0], _Z, [1.0, 0.0, 0.0], [0.08, 0.08]),
        _hole("slot", slot, -_Z, 1e-3, next_id="slot_chan",
              requires_grasp=True),
        _channel("slot_chan", slot, -_Z, 0.025,
                 yaw_axis=_Z.copy(), yaw_center=0.0, yaw_slack=0.07),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 6),
                         [0.10, 0.05, 0.0], [0.52, 0.42, 0.12])
    rng = np.random.default_rng(_CLOUD_SEED + 8)
    unstable = {int(i): rng.uniform(-0.05, 0.05, 3) for i in range(34, 40)}
    world = ConstraintWorld(
        regions=regions, feature_clouds={"scene": cloud},
        grasp_frames={"beam_grip1": Pose(trans=grip1.copy()),
                      "beam_grip2": Pose(trans=grip2.copy())},
        unstable_offsets=unstable, anchor=slot.copy())

    b = _CONTACT_BIAS
    start = Pose(trans=np.array([0.10, 0.05, 0.12]))
    s = _Script(world, start, gripper=0.0, seed=seed, frame_on="scene")
    s.goto(pos=grip1 + np.array([0.0, 0.0, 0.03]), speed=0.08)
    s.goto(pos=grip1, speed=0.04)
    s.dwell(0.05)
    s.mark()
    s.gripper(1.0)
    s.dwell(0.05)
    s.goto(pos=[grip1[0], grip1[1], 0.10], speed=0.08)
    s.goto(pos=[setdown[0], setdown[1], 0.10], speed=0.08)
    s.goto(pos=setdown, speed=0.04)
    s.dwell(0.05)
    s.mark()
    s.gripper(0.0)
    s.dwell(0.05)
    s.goto(pos=[setdown[0], setdown[1], 0.08], speed=0.08)
    s.goto(pos=[grip2[0], grip2[1], 0.06], speed=0.08)
    s.goto(pos=grip2, speed=0.04)
    s.dwell(0.05)
    s.mark()
    s.gripper(1.0)
    s.dwell(0.05)
    s.goto(pos=[grip2[0], grip2[1], 0.09], speed=0.08)
    s.goto(pos=[press[0], press[1], 0.09], speed=0.08)
    s.goto(pos=[press[0], press[1], 0.004], speed=0.08)
    s.goto(pos=[press[0], press[1], 0.0], speed=0.02)
    s.frame_on = None
    s.mark()
    s.goto(pos=[press[0], press[1], -b], speed=0.005)
    s.goto(pos=[slot[0], slot[1], -b], speed=0.02)
    s.dwell(0.04)
    s.mark()
    s.dwell(0.04)
    s.goto(pos=[slot[0] + b, slot[1], -b], speed=0.005)
    s.goto(pos=[slot[0] + b, slot[1], -0.025], speed=0.02)
    s.dwell(0.2)

    truth = {
        "scenario": "fmb_insert",
        "variant": 1,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_GRASP),
            _free_phase(EVENT_RELEASE),
            _free_phase(EVENT_GRASP),
            _free_phase(EVENT_MAKING),
            _contact_phase("plane", EVENT_BREAKING),
            _contact_phase("translation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=0.0))}, truth)
    return world, demo


# ---------------------------------------------------------------------------
# table leg: insert, regrasp, screw a quarter turn


def _one_leg(params, seed):
    socket = np.array([0.45, -0.15, 0.04])
    grip1 = np.array([0.20, -0.10, 0.06])
    screw_center = np.array([0.45, -0.15, 0.05])
    grip2 = screw_center + np.array([0.03, 0.0, 0.0])
    regions = [
        _hole("socket", socket, -_Z, 0.0025, next_id="sock_chan",
              requires_grasp=True),
        _channel("sock_chan", socket, -_Z, 0.025),
        _revolute("screw", screw_center, _Z, [0.03, 0.0, 0.0],
                  (0.0, 0.5 * np.pi), coupled=True),
    ]
    cloud = _scene_cloud(np.random.default_rng(_CLOUD_SEED + 9),
                         [0.12, -0.28, 0.0], [0.55, 0.02, 0.14])
    world = ConstraintWorld(
        regions=regions, feature_clouds={"scene": cloud},
        grasp_frames={"leg_grip1": Pose(trans=grip1.copy()),
                      "leg_grip2": Pose(trans=grip2.copy())},
        grasp_links={"leg_grip2": "screw"},
        anchor=socket.copy())

    b = _CONTACT_BIAS
    start = Pose(trans=np.array([0.15, -0.05, 0.12]))
    s = _Script(world, start, gripper=0.0, seed=seed, frame_on="scene")
    s.goto(pos=grip1 + np.array([0.0, 0.0, 0.03]), speed=0.08)
    s.goto(pos=grip1, speed=0.04)
    s.dwell(0.05)
    s.mark()
    s.gripper(1.0)
    s.dwell(0.05)
    s.goto(pos=[grip1[0], grip1[1], 0.10], speed=0.08)
    s.goto(pos=[socket[0], socket[1], 0.075], speed=0.08)
    s.goto(pos=[socket[0], socket[1], 0.040], speed=0.02)
    s.frame_on = None
    s.mark()
    s.goto(pos=[socket[0] + b, socket[1], 0.040], speed=0.005)
    s.goto(pos=[socket[0] + b, socket[1], 0.015], speed=0.02)
    s.dwell(0.05)
    s.gripper(0.0)
    s.mark()
    s.frame_on = "scene"
    s.goto(pos=[socket[0], socket[1], 0.055], speed=0.08)
    s.goto(pos=[grip2[0], grip2[1], 0.055], speed=0.08)
    s.goto(pos=grip2, speed=0.04)
    s.dwell(0.05)
    s.frame_on = None
    s.mark()
    s.gripper(1.0)
    s.dwell(0.05)
    s.sweep(screw_center, _Z, [1.0, 0.0, 0.0], 0.03 - b, 0.0, 0.5 * np.pi,
            omega=0.35, yaw0=0.0)
    s.dwell(0.2)

    truth = {
        "scenario": "one_leg",
        "variant": 1,
        "boundaries": list(s.marks),
        "phases": [
            _free_phase(EVENT_GRASP),
            _free_phase(EVENT_MAKING),
            _contact_phase("translation", EVENT_RELEASE),
            _free_phase(EVENT_GRASP),
            _contact_phase("rotation", EVENT_MAKING),
        ],
    }
    demo = s.demonstration({"scene": observe(world, initial_state(
        start, gripper=0.0))}, truth)
    return world, demo


_BUILDERS = {
    "puzzle": _puzzle,
    "key_lock": _key_lock,
    "coffee": _coffee,
    "latch": _latch,
    "drawer": _drawer,
    "fmb_insert": _fmb_insert,
    "one_leg": _one_leg,
}


def make_scenario(name, params=None, seed=0):
    """Build a scene and its scripted demonstration.

    Returns ``(world, demo)``.  ``params`` selects scenario variants, for
    example ``{"variant": "B"}`` for the maze or ``{"variant": 2}`` for
    the displaced lock.  ``seed`` only drives the recorded sensor noise;
    geometry is deterministic.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownScenario(
            f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
    return builder(params, seed)
