"""Deterministic quasi-static contact simulator.

An environment is a set of constraint regions (planes, channels, revolute
joints, holes, stops).  Each tick, the commanded equilibrium pose is
projected onto the feasible manifold of whatever the end-effector is
currently engaged with, and the reaction wrench is the region stiffness
times the leftover offset, expressed in the commanded body frame.

Channels, joints, and holes form linked mechanisms: a channel that ends
in a revolute joint hands engagement over when the coordinate reaches the
linking end, which is how multi-stage fixtures (mazes, locks, drawers)
are modeled.  Engagement state lives in SimState; worlds are never
mutated by stepping.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .demo import FeatureCloud
from .errors import ValidationError
from .se3 import Pose, Wrench, rotation_about_axis

CAPTURE_CONE_DEG = 10.0


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise ValidationError("zero-length direction")
    return v / n


def _rotvec(R: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (safe away from pi)."""
    tr = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(tr)
    if theta < 1e-9:
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0],
                         R[1, 0] - R[0, 1]]) / 2.0
    axis = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0],
                     R[1, 0] - R[0, 1]]) / (2.0 * np.sin(theta))
    return theta * axis


def _rotmat(rotvec: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(rotvec)
    if theta < 1e-12:
        return np.eye(3)
    return rotation_about_axis(rotvec / theta, theta).rotation()


REGION_KINDS = ("plane_surface", "prismatic_channel", "revolute_joint",
                "hole", "stop")


@dataclass
class EcRegion:
    """One environmental constraint with kind-specific geometry.

    geometry keys by kind:
      plane_surface: point, normal, tangent, half_extents (None = infinite)
      prismatic_channel: entry, axis, length, lateral_tol, one_way,
        pop (offset applied on exiting the far end), next_id,
        release_at_start, yaw_axis, yaw_center, yaw_slack, base_quat
      revolute_joint: center, axis, r0 (center -> path point at angle 0),
        psi_range, orientation_coupled, yaw_slack, base_quat, next_high
      hole: center, axis (insertion direction), radius, axial_window,
        entry_quat, cone_deg, yaw_tol_deg (None = no yaw gate), next_id
      stop: point, normal (one-sided halfspace normal·(p-point) >= 0)
    """
    id: str
    kind: str
    geometry: dict
    stiffness: float = 1e5
    ang_stiffness: float = 50.0
    friction_coeff: float = 0.0
    requires_grasp: bool = False

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValidationError(f"unknown region kind {self.kind!r}")
        if self.stiffness <= 0 or self.ang_stiffness <= 0:
            raise ValidationError("stiffness must be positive")
        g = self.geometry
        for key in ("point", "normal", "tangent", "entry", "axis", "center",
                    "r0", "pop"):
            if key in g and g[key] is not None:
                g[key] = np.asarray(g[key], dtype=float)
        for key in ("normal", "tangent", "axis"):
            if key in g and g[key] is not None:
                g[key] = _unit(g[key])
        for key in ("lateral_tol", "radius"):
            if key in g and g[key] is not None and g[key] <= 0:
                raise ValidationError(f"{key} must be positive")
        if "base_quat" in g and g["base_quat"] is not None:
            g["base_quat"] = np.asarray(g["base_quat"], dtype=float)
        if "entry_quat" in g and g["entry_quat"] is not None:
            g["entry_quat"] = np.asarray(g["entry_quat"], dtype=float)

    def base_rotation(self) -> np.ndarray:
        q = self.geometry.get("base_quat")
        if q is None:
            return np.eye(3)
        return Pose(q, np.zeros(3)).rotation()


@dataclass
class ConstraintWorld:
    regions: list = field(default_factory=list)
    feature_clouds: dict = field(default_factory=dict)
    grasp_frames: dict = field(default_factory=dict)
    grasp_links: dict = field(default_factory=dict)  # grasp frame -> region id
    unstable_offsets: dict = field(default_factory=dict)  # feature id -> EE-frame offset
    anchor: np.ndarray = field(default_factory=lambda: np.zeros(3))
    slip_per_phase_deg: float = 0.0

    def __post_init__(self):
        ids = [r.id for r in self.regions]
        if len(ids) != len(set(ids)):
            raise ValidationError("region ids must be unique")
        self.anchor = np.asarray(self.anchor, dtype=float)

    def region(self, rid: str) -> EcRegion:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)


@dataclass
class Engagement:
    region_id: str
    coord: float = 0.0          # channel arc length s, or joint angle psi
    snagged: bool = False       # hole engaged but entry gate failed


@dataclass
class SimState:
    ee_pose: Pose
    ee_twist: np.ndarray = field(default_factory=lambda: np.zeros(6))
    contact_set: frozenset = frozenset()
    gripper: float = 0.0
    engagement: Engagement | None = None
    slip: Pose = field(default_factory=Pose.identity)
    attached_frame: str | None = None
    tick: int = 0

    def copy(self) -> "SimState":
        return replace(self, ee_twist=self.ee_twist.copy())


def initial_state(pose: Pose, gripper: float = 0.0) -> SimState:
    return SimState(ee_pose=pose.copy(), gripper=gripper)


def _yaw_decompose(R_cmd: np.ndarray, R0: np.ndarray, axis: np.ndarray):
    delta = _rotvec(R_cmd @ R0.T)
    y = float(delta @ axis)
    residual = delta - y * axis
    return y, residual


def _compose_orientation(R0, axis, y, residual) -> np.ndarray:
    return _rotmat(residual + y * axis) @ R0


def _project_channel(region: EcRegion, p_cmd: np.ndarray, R_cmd: np.ndarray,
                     coord: float):
    g = region.geometry
    entry, axis, length = g["entry"], g["axis"], g["length"]
    s_raw = float((p_cmd - entry) @ axis)
    s = min(max(s_raw, 0.0), length)
    if g.get("one_way"):
        s = max(s, coord)
    p_real = entry + s * axis
    if g.get("yaw_slack") is None or g.get("yaw_axis") is None:
        R_real = R_cmd
    else:
        yaw_axis = _unit(g["yaw_axis"])
        y, residual = _yaw_decompose(R_cmd, region.base_rotation(), yaw_axis)
        center, slack = g.get("yaw_center", 0.0), g["yaw_slack"]
        y_real = min(max(y, center - slack), center + slack)
        R_real = _compose_orientation(region.base_rotation(), yaw_axis,
                                      y_real, residual)
    return s, p_real, R_real


def _joint_position(g: dict, psi: float) -> np.ndarray:
    r0, axis = g["r0"], g["axis"]
    return g["center"] + np.cos(psi) * r0 + np.sin(psi) * np.cross(axis, r0)


def _project_revolute(region: EcRegion, p_cmd: np.ndarray, R_cmd: np.ndarray,
                      coord: float):
    g = region.geometry
    axis, center, r0 = g["axis"], g["center"], g["r0"]
    lo, hi = g["psi_range"]
    rel = p_cmd - center
    rel_perp = rel - (rel @ axis) * axis
    if np.linalg.norm(rel_perp) < 1e-9:
        psi_proj = coord
    else:
        e2 = np.cross(axis, r0)
        raw = np.arctan2(rel_perp @ e2, rel_perp @ r0)
        # unwrap near the previous coordinate so long sweeps stay continuous
        psi_proj = raw + 2 * np.pi * np.round((coord - raw) / (2 * np.pi))
    psi = min(max(psi_proj, lo), hi)
    p_real = _joint_position(g, psi)
    R0 = region.base_rotation()
    if g.get("orientation_coupled"):
        R_real = rotation_about_axis(axis, psi).rotation() @ R0
    else:
        slack = g.get("yaw_slack")
        if slack is None:
            R_real = R_cmd
        else:
            y, residual = _yaw_decompose(R_cmd, R0, axis)
            # unwrap so sweeps past pi keep a continuous slack window
            y += 2 * np.pi * np.round((psi - y) / (2 * np.pi))
            y_real = min(max(y, psi - slack), psi + slack)
            R_real = _compose_orientation(R0, axis, y_real, residual)
    return psi, p_real, R_real


def _hole_gate(region: EcRegion, p_cmd: np.ndarray, R_cmd: np.ndarray):
    """Returns (laterally_in, axially_in, tilt_ok, yaw_ok)."""
    g = region.geometry
    axis, center = g["axis"], g["center"]
    rel = p_cmd - center
    axial = float(rel @ axis)
    lateral = np.linalg.norm(rel - axial * axis)
    window = g.get("axial_window", 0.006)
    R_e = Pose(g["entry_quat"], np.zeros(3)).rotation() \
        if g.get("entry_quat") is not None else np.eye(3)
    delta = _rotvec(R_cmd @ R_e.T)
    yaw = float(delta @ axis)
    tilt = np.linalg.norm(delta - yaw * axis)
    cone = np.deg2rad(g.get("cone_deg", CAPTURE_CONE_DEG))
    yaw_tol = g.get("yaw_tol_deg")
    yaw_ok = True if yaw_tol is None else abs(yaw) <= np.deg2rad(yaw_tol)
    return (lateral <= g["radius"], -0.002 <= axial <= window,
            tilt <= cone, yaw_ok)


def _plane_contacts(world: ConstraintWorld, p: np.ndarray):
    """Plane regions whose patch the point is inside and below."""
    out = []
    for r in world.regions:
        if r.kind != "plane_surface":
            continue
        g = r.geometry
        depth = float((p - g["point"]) @ g["normal"])
        if depth >= 0:
            continue
        if g.get("half_extents") is not None:
            t1 = g["tangent"]
            t2 = np.cross(g["normal"], t1)
            rel = p - g["point"]
            a, b = g["half_extents"]
            if abs(rel @ t1) > a or abs(rel @ t2) > b:
                continue
        out.append((r, depth))
    return out


def _resolve_engagement(world: ConstraintWorld, engagement: Engagement,
                        p_cmd: np.ndarray, R_cmd: np.ndarray):
    """Follow one engagement through projection, handoff, and release.

    Returns (engagement, p_real, R_real, k_lin, k_ang, contact_ids,
    friction_mu).  A released mechanism comes back as engagement None with
    the commanded pose passed through untouched.
    """
    released = (None, p_cmd.copy(), R_cmd, None, None, [], 0.0)
    for _ in range(4):  # bounded handoff chain per tick
        region = world.region(engagement.region_id)
        if region.kind == "hole":
            if not engagement.snagged:
                engagement = Engagement(region.geometry["next_id"], 0.0)
                continue
            g = region.geometry
            axial = float((p_cmd - g["center"]) @ g["axis"])
            if axial < -0.005:
                return released  # pulled back off the snag
            lat_in, ax_in, tilt_ok, yaw_ok = _hole_gate(region, p_cmd, R_cmd)
            if lat_in and tilt_ok and yaw_ok:
                engagement = Engagement(g["next_id"], 0.0)
                continue
            return (engagement, g["center"].copy(), R_cmd, region.stiffness,
                    region.ang_stiffness, [region.id], 0.0)
        if region.kind == "prismatic_channel":
            g = region.geometry
            s, p_real, R_real = _project_channel(region, p_cmd, R_cmd,
                                                 engagement.coord)
            if s >= g["length"] - 1e-12 and g.get("next_id"):
                nxt = world.region(g["next_id"])
                landing = p_real if g.get("pop") is None else p_real + g["pop"]
                # spring ejection: the realized state lands where the next
                # mechanism picks it up, which may sit behind the commanded one
                engagement = Engagement(nxt.id, _entry_coord(nxt, landing))
                continue
            raw = float((p_cmd - g["entry"]) @ g["axis"])
            if (s <= 1e-12 and g.get("release_at_start", True)
                    and not g.get("one_way") and raw < -0.004):
                return released
            return (Engagement(region.id, s), p_real, R_real,
                    region.stiffness, region.ang_stiffness, [region.id],
                    region.friction_coeff)
        if region.kind == "revolute_joint":
            g = region.geometry
            psi, p_real, R_real = _project_revolute(region, p_cmd, R_cmd,
                                                    engagement.coord)
            hi = g["psi_range"][1]
            if psi >= hi - 1e-12 and g.get("next_high"):
                nxt = world.region(g["next_high"])
                engagement = Engagement(nxt.id, _entry_coord(nxt, p_real))
                continue
            return (Engagement(region.id, psi), p_real, R_real,
                    region.stiffness, region.ang_stiffness, [region.id],
                    region.friction_coeff)
        raise ValidationError(
            f"region {region.id!r} of kind {region.kind!r} cannot hold an "
            "engagement")
    raise ValidationError("engagement handoff chain did not settle")


def world_step(world: ConstraintWorld, sim: SimState, commanded_pose: Pose,
               cfg) -> tuple[SimState, Wrench]:
    """One quasi-static tick. Returns the new state and the measured wrench
    in the commanded end-effector frame."""
    obj_cmd = commanded_pose @ sim.slip
    p_cmd = obj_cmd.trans
    R_cmd = obj_cmd.rotation()
    prev_obj = sim.ee_pose @ sim.slip

    engagement = sim.engagement
    contact: list[str] = []
    p_real = p_cmd.copy()
    R_real = R_cmd
    k_lin = k_ang = None
    friction_mu = 0.0

    # resolve sticky engagement first, including handoff and release
    if engagement is not None:
        (engagement, eng_p, eng_R, k_lin, k_ang, eng_contact,
         friction_mu) = _resolve_engagement(world, engagement, p_cmd, R_cmd)
        if engagement is not None:
            p_real, R_real = eng_p, eng_R
            contact.extend(eng_contact)

    if engagement is None:
        # try hole capture
        for r in world.regions:
            if r.kind != "hole":
                continue
            if r.requires_grasp and sim.gripper < 0.5:
                continue
            lat_in, ax_in, tilt_ok, yaw_ok = _hole_gate(r, p_cmd, R_cmd)
            if lat_in and ax_in and tilt_ok:
                if yaw_ok:
                    nxt = world.region(r.geometry["next_id"])
                    seed = Engagement(nxt.id, _entry_coord(nxt, p_cmd))
                    (engagement, p_real, R_real, k_lin, k_ang, eng_contact,
                     friction_mu) = _resolve_engagement(world, seed, p_cmd,
                                                        R_cmd)
                    contact.extend(eng_contact)
                else:
                    engagement = Engagement(r.id, 0.0, snagged=True)
                    p_real = r.geometry["center"].copy()
                    R_real = R_cmd
                    k_lin, k_ang = r.stiffness, r.ang_stiffness
                    contact.append(r.id)
                break

    if engagement is None and k_lin is None:
        # non-sticky plane and stop contacts
        planes = _plane_contacts(world, p_cmd)
        for r, depth in planes:
            p_real = p_real - depth * r.geometry["normal"]
            contact.append(r.id)
            k_lin, k_ang = r.stiffness, r.ang_stiffness
            friction_mu = r.friction_coeff
        for r in world.regions:
            if r.kind != "stop":
                continue
            g = r.geometry
            depth = float((p_real - g["point"]) @ g["normal"])
            if depth < 0:
                p_real = p_real - depth * g["normal"]
                contact.append(r.id)
                k_lin, k_ang = r.stiffness, r.ang_stiffness

    if k_lin is None:
        k_lin, k_ang = 1e5, 50.0  # unused when offsets are zero

    # reaction wrench from the commanded-vs-realized spring
    f_w = -k_lin * (p_cmd - p_real)
    delta_R = _rotvec(R_cmd @ R_real.T)
    tau_w = -k_ang * delta_R
    if friction_mu > 0.0 and np.linalg.norm(f_w) > 1e-9:
        motion = p_real - prev_obj.trans
        n_hat = f_w / np.linalg.norm(f_w)
        tangential = motion - (motion @ n_hat) * n_hat
        t_norm = np.linalg.norm(tangential)
        if t_norm > 1e-9:
            f_w = f_w - friction_mu * np.linalg.norm(f_w) * tangential / t_norm

    f_b = R_cmd.T @ f_w
    tau_b = R_cmd.T @ tau_w
    wrench = Wrench(force=f_b, torque=tau_b)

    obj_real = Pose.from_matrix_parts(R_real, p_real)
    ee_real = obj_real @ sim.slip.inverse()
    dt = getattr(cfg, "dt", 0.001)
    step_lin = (ee_real.trans - sim.ee_pose.trans) / dt
    step_ang = _rotvec(ee_real.rotation() @ sim.ee_pose.rotation().T) / dt
    new_sim = SimState(
        ee_pose=ee_real,
        ee_twist=np.concatenate([step_lin, step_ang]),
        contact_set=frozenset(contact),
        gripper=sim.gripper,
        engagement=engagement,
        slip=sim.slip,
        attached_frame=sim.attached_frame,
        tick=sim.tick + 1,
    )
    return new_sim, wrench


def _entry_coord(region: EcRegion, p: np.ndarray) -> float:
    if region.kind == "prismatic_channel":
        g = region.geometry
        s = float((p - g["entry"]) @ g["axis"])
        return min(max(s, 0.0), g["length"])
    if region.kind == "revolute_joint":
        g = region.geometry
        rel = p - g["center"]
        rel -= (rel @ g["axis"]) * g["axis"]
        if np.linalg.norm(rel) < 1e-9:
            return 0.0
        e2 = np.cross(g["axis"], g["r0"])
        return float(np.arctan2(rel @ e2, rel @ g["r0"]))
    return 0.0


def set_gripper(world: ConstraintWorld, sim: SimState, g: float) -> SimState:
    """Instantaneous gripper actuation with the proximity grasp rule.

    Closing within 1 cm and 10 degrees of a grasp frame attaches it; a
    frame listed in grasp_links additionally engages the mechanism it
    handles (drawer fronts, latch knobs).  Opening detaches everything and
    clears any in-hand slip.
    """
    new_sim = sim.copy()
    closing = g > 0.5 and sim.gripper <= 0.5
    opening = g <= 0.5 and sim.gripper > 0.5
    new_sim.gripper = float(g)
    if closing:
        for name, frame in world.grasp_frames.items():
            dp = np.linalg.norm(frame.trans - sim.ee_pose.trans)
            dq = (frame.inverse() @ sim.ee_pose).rotation_angle()
            if dp <= 0.01 and dq <= np.deg2rad(10.0):
                new_sim.attached_frame = name
                linked = world.grasp_links.get(name)
                if linked is not None:
                    region = world.region(linked)
                    new_sim.engagement = Engagement(
                        linked, _entry_coord(region, sim.ee_pose.trans))
                break
    if opening:
        new_sim.attached_frame = None
        new_sim.engagement = None
        new_sim.slip = Pose.identity()
    return new_sim


def apply_slip(sim: SimState, rotation_axis, angle: float) -> SimState:
    """Inject an in-hand slip: the held object rotates slightly in the
    gripper, shifting the command-to-object mapping."""
    new_sim = sim.copy()
    new_sim.slip = sim.slip @ rotation_about_axis(rotation_axis, angle)
    return new_sim


def observe(world: ConstraintWorld, sim: SimState,
            cloud_id: str = "scene") -> FeatureCloud:
    """Current feature view: world features at their placed positions,
    gripper-attached features riding on the end-effector."""
    base = world.feature_clouds[cloud_id]
    positions = base.positions.copy()
    for i, fid in enumerate(base.ids):
        off = world.unstable_offsets.get(int(fid))
        if off is not None:
            positions[i] = sim.ee_pose.apply(np.asarray(off, dtype=float))
    return FeatureCloud(id=cloud_id, positions=positions,
                        descriptors=base.descriptors.copy(),
                        ids=base.ids.copy())


def feature_views(world: ConstraintWorld, sim: SimState, n_views: int = 20,
                  cone_half_angle_deg: float = 15.0,
                  rng: np.random.Generator | None = None,
                  jitter_sigma: float = 0.0,
                  cloud_id: str = "scene") -> list:
    """Scripted viewpoint sweep: n poses on a cone re-observe the scene.
    World-fixed features stay put; end-effector-attached features move
    with the viewpoint, which is what the stability filter keys on."""
    rng = rng or np.random.default_rng(0)
    base = world.feature_clouds[cloud_id]
    views = []
    half = np.deg2rad(cone_half_angle_deg)
    for j in range(n_views):
        phi = 2 * np.pi * j / n_views
        tilt_axis = np.array([np.cos(phi), np.sin(phi), 0.0])
        view = rotation_about_axis(tilt_axis, half)
        positions = base.positions.copy()
        for i, fid in enumerate(base.ids):
            off = world.unstable_offsets.get(int(fid))
            if off is not None:
                moved = view @ sim.ee_pose
                positions[i] = moved.apply(np.asarray(off, dtype=float))
        if jitter_sigma > 0:
            positions = positions + rng.normal(0, jitter_sigma,
                                               positions.shape)
        views.append(FeatureCloud(id=f"{cloud_id}-view{j}",
                                  positions=positions,
                                  descriptors=base.descriptors.copy(),
                                  ids=list(base.ids)))
    return views


def transform_world(world: ConstraintWorld, pose: Pose) -> ConstraintWorld:
    """Rigidly transform every region, cloud, and grasp frame."""
    R = pose.rotation()
    out = copy.deepcopy(world)
    for r in out.regions:
        g = r.geometry
        for key in ("point", "entry", "center"):
            if key in g and g[key] is not None:
                g[key] = pose.apply(g[key])
        for key in ("normal", "tangent", "axis", "yaw_axis", "r0", "pop"):
            if key in g and g[key] is not None:
                g[key] = R @ np.asarray(g[key], dtype=float)
        for key in ("base_quat", "entry_quat"):
            if key in g and g[key] is not None:
                rotated = pose @ Pose(g[key], np.zeros(3))
                g[key] = rotated.quat
    for cid, cloud in out.feature_clouds.items():
        out.feature_clouds[cid] = cloud.transformed(pose)
    for name, frame in out.grasp_frames.items():
        out.grasp_frames[name] = pose @ frame
    out.anchor = pose.apply(out.anchor)
    return out


def perturb_pose(world: ConstraintWorld, rotation_range_deg: float,
                 translation_range_m: float, seed: int) -> ConstraintWorld:
    """Seeded uniform rigid perturbation about the world anchor."""
    if rotation_range_deg < 0 or translation_range_m < 0:
        raise ValidationError("perturbation ranges must be non-negative")
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-np.deg2rad(rotation_range_deg),
                         np.deg2rad(rotation_range_deg), 3)
    trans = rng.uniform(-translation_range_m, translation_range_m, 3)
    R = (_rotmat(np.array([0, 0, angles[2]]))
         @ _rotmat(np.array([0, angles[1], 0]))
         @ _rotmat(np.array([angles[0], 0, 0])))
    anchor = world.anchor
    t = anchor - R @ anchor + trans
    return transform_world(world, Pose.from_matrix_parts(R, t))


def region_to_json(region: EcRegion) -> dict:
    g = {}
    for k, v in region.geometry.items():
        g[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return {"id": region.id, "kind": region.kind, "geometry": g,
            "stiffness": region.stiffness,
            "ang_stiffness": region.ang_stiffness,
            "friction_coeff": region.friction_coeff,
            "requires_grasp": region.requires_grasp}


def region_from_json(obj: dict) -> EcRegion:
    return EcRegion(id=obj["id"], kind=obj["kind"],
                    geometry=dict(obj["geometry"]),
                    stiffness=obj.get("stiffness", 1e5),
                    ang_stiffness=obj.get("ang_stiffness", 50.0),
                    friction_coeff=obj.get("friction_coeff", 0.0),
                    requires_grasp=obj.get("requires_grasp", False))


def world_to_json(world: ConstraintWorld) -> dict:
    return {
        "regions": [region_to_json(r) for r in world.regions],
        "grasp_frames": {k: [*v.trans.tolist(), *v.quat.tolist()]
                         for k, v in world.grasp_frames.items()},
        "grasp_links": dict(world.grasp_links),
        "anchor": world.anchor.tolist(),
        "unstable_offsets": {k: np.asarray(v).tolist()
                             for k, v in world.unstable_offsets.items()},
        "slip_per_phase_deg": world.slip_per_phase_deg,
    }


def world_from_json(obj: dict) -> ConstraintWorld:
    frames = {}
    for k, v in obj.get("grasp_frames", {}).items():
        frames[k] = Pose(np.asarray(v[3:], dtype=float),
                         np.asarray(v[:3], dtype=float))
    return ConstraintWorld(
        regions=[region_from_json(r) for r in obj["regions"]],
        grasp_frames=frames,
        grasp_links=dict(obj.get("grasp_links", {})),
        anchor=np.asarray(obj.get("anchor", [0, 0, 0]), dtype=float),
        unstable_offsets={int(k): np.asarray(v, dtype=float)
                          for k, v in obj.get("unstable_offsets", {}).items()},
        slip_per_phase_deg=obj.get("slip_per_phase_deg", 0.0),
    )


def save_world(world: ConstraintWorld, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(world_to_json(world), f, indent=1, sort_keys=True)
