"""Policy construction, trial execution, and corrections.

A labeled demonstration becomes a chain of compliant primitives, one per
motion phase, each annotated with the boundary event that should end it.
At execution time every node is first carried into the current scene: free
nodes by aligning their reference feature cloud against the live view,
contact nodes by the rigid offset between the recorded entry pose and the
pose at which execution actually arrives.  That entry offset is also what
lets a correction propagate: once one node ends somewhere new, everything
downstream follows automatically.

A trial succeeds when every node reports the event its boundary promised.
Anything else comes back as a ``FailureReport`` inside the log, never as an
exception, so callers can hand the report to a correction pass.

Corrections are small demonstrations addressed to one contact node.  Their
free prefix replaces the approach, their contact fragment re-teaches the
node's path, model, and any deliberate yaw weave recorded by the teacher.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .augment import (augment_demonstration, filter_features,
                      mean_world_force, plane_from_force, score_features)
from .constraint_fit import (ConstraintModel, classify_phase, fit_line,
                             fit_plane, fit_revolute)
from .demo import (EVENT_GRASP, EVENT_MAKING, EVENT_RELEASE, Demonstration,
                   FeatureCloud, MotionPhase, Waypoint, _parse_waypoint)
from .errors import (DegenerateGeometry, EmptyCloud, InsufficientMatches,
                     KindMismatch, ParseError, UnlabeledPhase,
                     ValidationError)
from .primitives import (EcPrimitive, ExecConfig, Execution, _goal_budget,
                         align_features, execute_primitive)
from .se3 import Pose, Wrench, rotation_about_axis
from .segmentation import segment
from .world import ConstraintWorld, apply_slip, feature_views, initial_state

# Yaw weave below this amplitude in a correction fragment is treated as
# teacher tremor rather than a deliberate search motion.
WIGGLE_FLOOR = np.deg2rad(1.0)

# In-hand slip axes cycle through yaw first: for an upright grasp that is
# the mode a parallel gripper actually slips in.
SLIP_AXES = (np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]),
             np.array([0.0, 1.0, 0.0]))


@dataclass
class PolicyNode:
    name: str
    kind: str                  # free | plane | translation | rotation
    primitive: EcPrimitive
    expected_event: str


@dataclass
class Policy:
    nodes: list

    def node(self, name: str) -> PolicyNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise ValidationError(f"no policy node named {name!r}")


@dataclass
class FailureReport:
    node: str
    kind: str
    expected_event: str
    observed_event: str
    tick: int
    ee_position: np.ndarray
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "node": self.node, "kind": self.kind,
            "expected_event": self.expected_event,
            "observed_event": self.observed_event, "tick": self.tick,
            "ee_position": np.asarray(self.ee_position).tolist(),
            "info": {k: v for k, v in self.info.items()
                     if isinstance(v, (str, int, float, bool))},
        }


@dataclass
class ExecutionLog:
    success: bool
    failure: Optional[FailureReport]
    node_events: list          # (node name, observed event)
    ticks: int
    violations: int
    peak_wrench: np.ndarray
    records: list              # decimated [t, f6] force rows
    sim: object                # final SimState
    node_spans: list = field(default_factory=list)  # (name, tick0, tick1)

    def to_json(self) -> dict:
        return {
            "success": bool(self.success),
            "failure": self.failure.to_json() if self.failure else None,
            "node_events": [list(e) for e in self.node_events],
            "ticks": int(self.ticks),
            "violations": int(self.violations),
            "peak_wrench": np.round(self.peak_wrench, 9).tolist(),
            "node_spans": [[n, int(a), int(b)]
                           for n, a, b in self.node_spans],
        }


@dataclass
class Correction:
    """A recovery demonstration addressed to one policy node."""

    target: str
    demo: Demonstration


def _filtered_clouds(world: ConstraintWorld, demo: Demonstration) -> dict:
    """Stability-filter every demo cloud with a viewpoint sweep."""
    if not demo.feature_clouds:
        return {}
    first = demo.waypoints[0]
    sim = initial_state(first.pose, first.gripper)
    out = {}
    for cid, cloud in demo.feature_clouds.items():
        views = feature_views(world, sim, cloud_id=cid)
        out[cid] = filter_features(cloud, score_features(views))
    return out


def build_policy(world: ConstraintWorld, demo: Demonstration,
                 phases: Optional[list] = None) -> Policy:
    """Chain one primitive per labeled phase.

    ``phases`` defaults to segmenting and augmenting the demonstration
    here.  Free nodes leading into contact get the successor's model as a
    funnel; boundaries that grasp or release become queued gripper actions
    so the event fires even when the trajectory lands short.
    """
    if phases is None:
        phases = augment_demonstration(world, demo)
    clouds = _filtered_clouds(world, demo)
    nodes = []
    for k, ph in enumerate(phases):
        if ph.ec_type is None or ph.terminal_event is None:
            raise UnlabeledPhase(
                f"phase {k} [{ph.start}, {ph.stop}) is missing labels")
        kind = "free" if ph.ec_type == "free_space" else ph.ec_type
        traj = list(demo.waypoints[ph.start:ph.stop])
        actions = []
        if ph.terminal_event == EVENT_GRASP:
            actions = [(len(traj), 1.0)]
        elif ph.terminal_event == EVENT_RELEASE:
            actions = [(len(traj), 0.0)]
        funnel = None
        if (kind == "free" and ph.terminal_event == EVENT_MAKING
                and k + 1 < len(phases)
                and phases[k + 1].model is not None):
            funnel = phases[k + 1].model
        reference = clouds.get(ph.reference_cloud_id)
        prim = EcPrimitive(kind=kind, trajectory=traj, model=ph.model,
                           reference_cloud=reference,
                           gripper_actions=actions,
                           demo_entry=traj[0].pose.copy(),
                           funnel_into=funnel)
        nodes.append(PolicyNode(name=f"phase{k:02d}", kind=kind,
                                primitive=prim,
                                expected_event=ph.terminal_event))
    if not nodes:
        raise ValidationError("policy needs at least one phase")
    return Policy(nodes=nodes)


def _fragment_angle(traj: list, axis: np.ndarray) -> float:
    """Signed rotation about ``axis`` accumulated waypoint to waypoint, so
    arcs beyond a half turn stay unwrapped."""
    total = 0.0
    prev = Rotation.from_matrix(traj[0].pose.rotation())
    for wp in traj[1:]:
        cur = Rotation.from_matrix(wp.pose.rotation())
        total += float((prev.inv() * cur).as_rotvec() @ axis)
        prev = cur
    return total


def _raw_replay(ex: Execution, policy: Policy) -> list:
    """Open-loop replay: no limiter, no alignment, no tracker updates.

    Free, plane, and sliding nodes replay their recorded paths verbatim.
    Rotation nodes instead sweep the arc prescribed by their stored model,
    because that is what running a model without online adaptation means;
    a corrupted model is followed faithfully into the constraint.
    """
    ctrl = ex.cfg.controller
    spans = []
    for node in policy.nodes:
        t0 = ex.tick
        prim = node.primitive
        if node.kind == "rotation" and prim.model is not None:
            axis = prim.model.axis / np.linalg.norm(prim.model.axis)
            total = _fragment_angle(prim.trajectory, axis)
            entry = ex.cmd.copy()
            steps = max(len(prim.trajectory) - 1, 1)
            for k in range(1, steps + 1):
                about = rotation_about_axis(axis, total * k / steps)
                turn = Pose(about.quat,
                            prim.model.point - about.rotation()
                            @ prim.model.point)
                goal = turn @ entry
                ex.drive(goal, limiter=False, controller=ctrl,
                         max_ticks=_goal_budget(ex, goal, ctrl),
                         tol_lin=5e-4, tol_ang=5e-3)
        else:
            for wp in prim.trajectory:
                if (wp.gripper > 0.5) != (ex.sim.gripper > 0.5):
                    ex.set_gripper(wp.gripper)
                ex.drive(wp.pose, limiter=False, controller=ctrl,
                         max_ticks=_goal_budget(ex, wp.pose, ctrl),
                         tol_lin=5e-4, tol_ang=5e-3)
        spans.append((node.name, t0, ex.tick))
    return spans


def execute(policy: Policy, world: ConstraintWorld, start_pose: Pose,
            cfg: Optional[ExecConfig] = None,
            rng: Optional[np.random.Generator] = None,
            adapt: bool = True) -> ExecutionLog:
    """Run the policy once against a world; failures are data, not raises.

    With ``adapt`` off the recorded trajectories replay verbatim with the
    wrench limiter disabled, which is the baseline a compliant policy is
    measured against; no event contract is evaluated for it.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    gripper0 = policy.nodes[0].primitive.trajectory[0].gripper
    ex = Execution(world, initial_state(start_pose, gripper0), cfg=cfg,
                   rng=rng)
    if not adapt:
        spans = _raw_replay(ex, policy)
        return ExecutionLog(success=False, failure=None, node_events=[],
                            ticks=ex.tick, violations=ex.violations,
                            peak_wrench=ex.peak_wrench.copy(),
                            records=list(ex.records), sim=ex.sim,
                            node_spans=spans)
    failure = None
    node_events = []
    spans = []
    contact_count = 0
    for node in policy.nodes:
        tick0 = ex.tick
        prim = node.primitive
        if node.kind == "free":
            if prim.reference_cloud is not None:
                try:
                    a = align_features(prim.reference_cloud,
                                       ex.observe(prim.reference_cloud.id))
                except InsufficientMatches as e:
                    failure = FailureReport(
                        node=node.name, kind=node.kind,
                        expected_event=node.expected_event,
                        observed_event="alignment_failed", tick=ex.tick,
                        ee_position=ex.sim.ee_pose.trans.copy(),
                        info={"error": str(e)})
                    break
                prim = prim.transformed(a)
        else:
            if world.slip_per_phase_deg > 0.0:
                axis = SLIP_AXES[contact_count % len(SLIP_AXES)]
                angle = rng.uniform(
                    -np.deg2rad(world.slip_per_phase_deg),
                    np.deg2rad(world.slip_per_phase_deg))
                ex.sim = apply_slip(ex.sim, axis, angle)
            contact_count += 1
            prim = prim.transformed(ex.cmd @ prim.demo_entry.inverse())
        outcome = execute_primitive(ex, prim)
        node_events.append((node.name, outcome.event))
        spans.append((node.name, tick0, ex.tick))
        if outcome.event != node.expected_event:
            failure = FailureReport(
                node=node.name, kind=node.kind,
                expected_event=node.expected_event,
                observed_event=outcome.event, tick=ex.tick,
                ee_position=ex.sim.ee_pose.trans.copy(),
                info=dict(outcome.info))
            break
    return ExecutionLog(success=failure is None, failure=failure,
                        node_events=node_events, ticks=ex.tick,
                        violations=ex.violations,
                        peak_wrench=ex.peak_wrench.copy(),
                        records=list(ex.records), sim=ex.sim,
                        node_spans=spans)


# ---------------------------------------------------------------------------
# corrections


def _wiggle_amplitude(traj: list, axis: np.ndarray) -> float:
    """Half range of the signed rotation about ``axis`` along a fragment."""
    r0 = Rotation.from_matrix(traj[0].pose.rotation())
    angles = []
    for wp in traj:
        rel = r0.inv() * Rotation.from_matrix(wp.pose.rotation())
        angles.append(float(rel.as_rotvec() @ axis))
    amplitude = 0.5 * (max(angles) - min(angles))
    return amplitude if amplitude >= WIGGLE_FLOOR else 0.0


def _refit_fragment(demo: Demonstration, phase: MotionPhase,
                    kind: str) -> ConstraintModel:
    positions = demo.positions()[phase.start:phase.stop]
    quats = demo.quats()[phase.start:phase.stop]
    ranking = classify_phase(quats)
    if kind == "rotation":
        if ranking.candidates[0] != "rotation":
            raise KindMismatch(
                "correction fragment shows no rotation to re-teach one")
        return fit_revolute(positions, quats)
    if ranking.candidates[0] == "rotation":
        raise KindMismatch(
            f"correction fragment rotates but targets a {kind} node")
    if kind == "translation":
        return fit_line(positions)
    if kind == "plane":
        reaction = mean_world_force(demo, phase)
        s = np.linalg.svd(positions - positions.mean(axis=0),
                          compute_uv=False)
        if s[1] < max(1e-10, 0.1 * s[0]):
            # A press-and-slide correction is a straight path; its plane
            # is oriented by the reaction, not by degenerate geometry.
            return plane_from_force(positions, reaction)
        try:
            return fit_plane(positions, contact_force=-reaction)
        except DegenerateGeometry:
            return plane_from_force(positions, reaction)
    raise ValidationError(f"cannot refit a {kind!r} node")


def apply_correction(policy: Policy, correction: Correction) -> Policy:
    """New policy with one node re-taught by a recovery demonstration.

    The correction's free prefix replaces the approach node just before the
    target (or is inserted if there is none); its contact fragment replaces
    the target's trajectory, refit model, and yaw weave.  All other nodes
    are kept, so repeated corrections only ever narrow in.
    """
    names = [n.name for n in policy.nodes]
    if correction.target not in names:
        raise ValidationError(
            f"correction targets unknown node {correction.target!r}")
    idx = names.index(correction.target)
    target = policy.nodes[idx]
    if target.kind == "free":
        raise KindMismatch("corrections address contact nodes")
    phases = segment(correction.demo)
    contact = [p for p in phases if p.contact_label == "in_contact"]
    if len(contact) != 1:
        raise ValidationError(
            f"correction needs exactly one contact fragment, got "
            f"{len(contact)}")
    fragment = contact[0]
    model = _refit_fragment(correction.demo, fragment, target.kind)
    traj = list(correction.demo.waypoints[fragment.start:fragment.stop])
    wiggle = 0.0
    if target.kind == "plane":
        wiggle = _wiggle_amplitude(traj, model.axis)
    old = target.primitive
    new_target = PolicyNode(
        name=target.name, kind=target.kind,
        expected_event=target.expected_event,
        primitive=EcPrimitive(kind=target.kind, trajectory=traj, model=model,
                              reference_cloud=old.reference_cloud,
                              gripper_actions=list(old.gripper_actions),
                              demo_entry=traj[0].pose.copy(), wiggle=wiggle,
                              funnel_into=old.funnel_into))
    nodes = list(policy.nodes)
    nodes[idx] = new_target
    if fragment.start > 0:
        approach = list(correction.demo.waypoints[:fragment.start])
        prior = nodes[idx - 1] if idx > 0 else None
        if prior is not None and prior.kind == "free":
            old_actions = [(len(approach), g)
                           for _, g in prior.primitive.gripper_actions]
            nodes[idx - 1] = PolicyNode(
                name=prior.name, kind="free",
                expected_event=prior.expected_event,
                primitive=EcPrimitive(
                    kind="free", trajectory=approach,
                    reference_cloud=prior.primitive.reference_cloud,
                    gripper_actions=old_actions,
                    demo_entry=approach[0].pose.copy(),
                    funnel_into=model))
        else:
            nodes.insert(idx, PolicyNode(
                name=f"{target.name}-approach", kind="free",
                expected_event=EVENT_MAKING,
                primitive=EcPrimitive(
                    kind="free", trajectory=approach,
                    demo_entry=approach[0].pose.copy(),
                    funnel_into=model)))
    return Policy(nodes=nodes)


# ---------------------------------------------------------------------------
# persistence


def _waypoint_to_json(wp: Waypoint) -> dict:
    return {
        "t": wp.t,
        "pose": wp.pose.trans.tolist() + wp.pose.quat.tolist(),
        "g": wp.gripper,
        "wrench": wp.wrench.as_vec6().tolist(),
        "frame": wp.feature_frame,
    }


def _cloud_to_json(cloud: FeatureCloud) -> dict:
    return {
        "id": cloud.id,
        "positions": cloud.positions.tolist(),
        "descriptors": cloud.descriptors.tolist(),
        "ids": cloud.ids.tolist(),
        "scores": cloud.scores.tolist(),
    }


def _cloud_from_json(obj: dict) -> FeatureCloud:
    try:
        return FeatureCloud(str(obj["id"]),
                            np.asarray(obj["positions"], dtype=float),
                            np.asarray(obj["descriptors"], dtype=float),
                            np.asarray(obj["ids"], dtype=int),
                            np.asarray(obj["scores"], dtype=float))
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"malformed feature cloud record ({e})") from e


def policy_to_json(policy: Policy) -> dict:
    nodes = []
    for n in policy.nodes:
        p = n.primitive
        nodes.append({
            "name": n.name,
            "kind": n.kind,
            "expected_event": n.expected_event,
            "trajectory": [_waypoint_to_json(w) for w in p.trajectory],
            "model": p.model.to_json() if p.model else None,
            "reference_cloud": (_cloud_to_json(p.reference_cloud)
                                if p.reference_cloud else None),
            "gripper_actions": [[int(i), float(g)]
                                for i, g in p.gripper_actions],
            "demo_entry": (p.demo_entry.trans.tolist()
                           + p.demo_entry.quat.tolist()),
            "wiggle": float(p.wiggle),
            "funnel_into": p.funnel_into.to_json() if p.funnel_into else None,
        })
    return {"nodes": nodes}


def policy_from_json(obj: dict) -> Policy:
    try:
        records = obj["nodes"]
    except (KeyError, TypeError) as e:
        raise ParseError(f"malformed policy record ({e})") from e
    nodes = []
    for rec in records:
        try:
            traj = [_parse_waypoint(w, lineno=i)
                    for i, w in enumerate(rec["trajectory"])]
            entry = rec["demo_entry"]
            prim = EcPrimitive(
                kind=rec["kind"],
                trajectory=traj,
                model=(ConstraintModel.from_json(rec["model"])
                       if rec.get("model") else None),
                reference_cloud=(_cloud_from_json(rec["reference_cloud"])
                                 if rec.get("reference_cloud") else None),
                gripper_actions=[(int(i), float(g))
                                 for i, g in rec.get("gripper_actions", [])],
                demo_entry=Pose(np.asarray(entry[3:], dtype=float),
                                np.asarray(entry[:3], dtype=float)),
                wiggle=float(rec.get("wiggle", 0.0)),
                funnel_into=(ConstraintModel.from_json(rec["funnel_into"])
                             if rec.get("funnel_into") else None))
            nodes.append(PolicyNode(name=str(rec["name"]), kind=rec["kind"],
                                    primitive=prim,
                                    expected_event=rec["expected_event"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"malformed policy node ({e})") from e
    return Policy(nodes=nodes)


def save_policy(policy: Policy, path: Path) -> None:
    Path(path).write_text(json.dumps(policy_to_json(policy), sort_keys=True))


def load_policy(path: Path) -> Policy:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e
    return policy_from_json(obj)


def save_correction(correction: Correction, path: Path) -> None:
    obj = {
        "target": correction.target,
        "waypoints": [_waypoint_to_json(w)
                      for w in correction.demo.waypoints],
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True))


def load_correction(path: Path) -> Correction:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
        target = str(obj["target"])
        wps = [_parse_waypoint(w, lineno=i)
               for i, w in enumerate(obj["waypoints"])]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ParseError(f"{path}: {e}") from e
    if not wps:
        raise ValidationError(f"{path}: correction has no waypoints")
    return Correction(target=target, demo=Demonstration(waypoints=wps))
