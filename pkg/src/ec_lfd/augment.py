"""Demonstration augmentation by replay in simulation.

A segmented demonstration says where each motion phase starts and stops but
not what kind of constraint the phase moved along, nor how one phase hands
over to the next.  This module answers both questions by replaying the
demonstration once in the simulator and pausing at each phase midpoint to
run two kinds of short physical experiments:

* **probing** resolves the line-on-plane ambiguity.  A straight slide fits a
  line whether the end effector was trapped in a channel or merely chose a
  straight path across a surface.  Pushing a centimetre to each side of the
  motion and comparing realized to commanded travel separates the two.
* **transition checks** classify each phase boundary.  The first stretch of
  the next phase, rigidly carried to the current pose, is replayed without
  any force limiter.  If the constraint blocks it, the boundary breaks the
  current contact; if it goes through, the boundary makes a new one.

Both experiments snapshot the simulator state beforehand and restore it
afterwards, which is the privilege of an offline build step.  The same pass
also picks a reference feature cloud for each free-space phase and fills in
the fitted constraint model, so its output is a fully labeled phase list
ready for policy construction.

Feature stability scoring lives here as well: features are observed from a
sweep of viewpoints and kept only when their apparent position stays put.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .constraint_fit import (ConstraintModel, classify_phase, fit_line,
                             fit_plane, fit_revolute)
from .controller import ControllerConfig
from .demo import (EVENT_BREAKING, EVENT_GRASP, EVENT_MAKING,
                   EVENT_NON_CONTACT, EVENT_RELEASE, Demonstration,
                   FeatureCloud, MotionPhase)
from .errors import (DegenerateDirection, DegenerateGeometry, EmptyCloud,
                     ValidationError)
from .primitives import Execution, _goal_budget, select_reference_frame
from .se3 import Pose, quat_geodesic_angle
from .segmentation import segment
from .world import ConstraintWorld, initial_state

# Probe travel per side and the realized-over-commanded ratio below which
# motion counts as blocked.  The same ratio separates breaking from making
# transitions.
PROBE_DISTANCE = 0.01
PROBE_RATIO = 0.25

# Path length of the look-ahead fragment used by transition checks, and the
# weight converting radians of rotation into the combined path metric.
VERIFY_PATH = 0.02
ANGLE_WEIGHT = 0.05

# A phase whose second singular value falls below this fraction of the first
# is treated as a straight line and sent to the prober.
COLLINEAR_RATIO = 0.1

# Feature stability: score = exp(-spread / SCORE_SCALE), kept at MIN_SCORE.
SCORE_SCALE = 0.01
MIN_SCORE = 0.2

# Waypoints either side of a boundary searched for a gripper command.
GRIPPER_WINDOW = 5


@dataclass
class ProbePlan:
    """One executed probe: its direction, travel, and verdict."""

    direction: np.ndarray
    distance: float
    ratio: float
    constrained: bool


@dataclass
class FeatureScore:
    feature_id: int
    spread: float
    score: float


def _replay_controller() -> ControllerConfig:
    """Fast unclamped-force controller for re-driving recorded paths."""
    return ControllerConfig(v_max=[0.1, 0.1, 0.1, 1.5, 1.5, 1.5])


def probe_direction(model: ConstraintModel,
                    ee_position: Optional[np.ndarray] = None) -> np.ndarray:
    """Direction in which a probe best tests the given constraint.

    Planes are probed along the normal, revolute joints radially away from
    the axis, and candidate lines sideways: perpendicular to the motion and
    to the most transverse coordinate axis, so the probe stays parallel to
    any surface the line might be lying on.
    """
    if model.kind == "plane":
        return model.axis.copy()
    if model.kind == "rotation":
        if ee_position is None:
            raise ValidationError("radial probe needs the current position")
        rel = np.asarray(ee_position, dtype=float) - model.point
        rel_perp = rel - np.dot(rel, model.axis) * model.axis
        norm = np.linalg.norm(rel_perp)
        if norm < 1e-6:
            raise DegenerateDirection(
                "probe start sits on the rotation axis")
        return rel_perp / norm
    if model.kind == "translation":
        u = model.axis
        candidates = np.eye(3)[::-1]  # prefer z, then y, then x
        dots = np.abs(candidates @ u)
        e = candidates[int(np.argmin(dots))]
        aux = e - np.dot(e, u) * u
        norm = np.linalg.norm(aux)
        if norm < 1e-9:
            raise DegenerateDirection("no transverse axis for line probe")
        probe = np.cross(u, aux / norm)
        return probe / np.linalg.norm(probe)
    raise ValidationError(f"cannot probe a {model.kind!r} model")


def _snapshot(ex: Execution):
    return ex.sim.copy(), ex.cmd.copy()


def _restore(ex: Execution, snap) -> None:
    ex.sim = snap[0].copy()
    ex.cmd = snap[1].copy()


def _measured(ex: Execution, sigma: float,
              rng: Optional[np.random.Generator],
              samples: int = 20) -> np.ndarray:
    """Position reading at a probe endpoint.

    Noisy readings are averaged over a short stationary dwell; a single
    sample at each end would put millimetre sensor noise within reach of
    the blocked-motion threshold."""
    pos = ex.sim.ee_pose.trans.copy()
    if sigma > 0.0 and rng is not None:
        pos = pos + rng.normal(0.0, sigma, (samples, 3)).mean(axis=0)
    return pos


def disambiguate(ex: Execution, model: ConstraintModel,
                 distance: float = PROBE_DISTANCE,
                 noise_sigma: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> ProbePlan:
    """Push the end effector both ways along the probe direction.

    Runs without the force limiter so the commanded pose always covers the
    full distance; the realized pose only follows when nothing is in the
    way.  State is restored after each leg, so the probe leaves no trace.
    """
    direction = probe_direction(model, ex.sim.ee_pose.trans)
    ctrl = _replay_controller()
    snap = _snapshot(ex)
    realized = 0.0
    commanded = 0.0
    for sign in (1.0, -1.0):
        start_real = _measured(ex, noise_sigma, rng)
        start_cmd = ex.cmd.trans.copy()
        goal = Pose(ex.cmd.quat.copy(),
                    ex.cmd.trans + sign * distance * direction)
        ex.drive(goal, limiter=False, controller=ctrl,
                 max_ticks=_goal_budget(ex, goal, ctrl))
        realized += np.linalg.norm(_measured(ex, noise_sigma, rng)
                                   - start_real)
        commanded += np.linalg.norm(ex.cmd.trans - start_cmd)
        _restore(ex, snap)
    ratio = realized / max(commanded, 1e-12)
    return ProbePlan(direction=direction, distance=distance, ratio=ratio,
                     constrained=bool(ratio < PROBE_RATIO))


def _fragment_goals(ex: Execution, demo: Demonstration,
                    nxt: MotionPhase) -> list:
    """First stretch of the next phase, rigidly carried to the current pose."""
    wps = demo.waypoints[nxt.start:nxt.stop]
    t = ex.cmd @ wps[0].pose.inverse()
    goals = []
    path = 0.0
    prev = wps[0].pose.trans
    for wp in wps[1:]:
        goals.append(t @ wp.pose)
        path += np.linalg.norm(wp.pose.trans - prev)
        prev = wp.pose.trans
        if path >= VERIFY_PATH and len(goals) >= 2:
            break
    return goals


def _combined_ratio(ex: Execution, goals: list) -> float:
    """Replay goals without the limiter; realized over commanded path."""
    ctrl = _replay_controller()
    state = {
        "cmd": ex.cmd.copy(), "real": ex.sim.ee_pose.copy(),
        "cmd_sum": 0.0, "real_sum": 0.0,
    }

    def accumulate() -> None:
        cur_cmd, cur_real = ex.cmd, ex.sim.ee_pose
        state["cmd_sum"] += (
            np.linalg.norm(cur_cmd.trans - state["cmd"].trans)
            + ANGLE_WEIGHT * quat_geodesic_angle(cur_cmd.quat,
                                                 state["cmd"].quat))
        state["real_sum"] += (
            np.linalg.norm(cur_real.trans - state["real"].trans)
            + ANGLE_WEIGHT * quat_geodesic_angle(cur_real.quat,
                                                 state["real"].quat))
        state["cmd"] = cur_cmd.copy()
        state["real"] = cur_real.copy()

    def on_tick() -> None:
        accumulate()
        return None

    for goal in goals:
        ex.drive(goal, limiter=False, controller=ctrl, on_tick=on_tick,
                 max_ticks=_goal_budget(ex, goal, ctrl))
    return state["real_sum"] / max(state["cmd_sum"], 1e-12)


def _gripper_event_near(demo: Demonstration, boundary: int) -> Optional[str]:
    g = demo.grippers() > 0.5
    lo = max(boundary - GRIPPER_WINDOW, 0)
    hi = min(boundary + GRIPPER_WINDOW, len(g))
    flips = np.nonzero(np.diff(g[lo:hi]))[0]
    if len(flips) == 0:
        return None
    return EVENT_GRASP if g[lo + flips[0] + 1] else EVENT_RELEASE


def verify_transition(ex: Execution, demo: Demonstration,
                      phases: list, k: int) -> str:
    """Label the boundary at the end of phase ``k``.

    A gripper command near the boundary names the event outright.  A free
    phase entering contact makes it; contact returning to free air without
    a gripper change means the demonstration simply withdrew.  Between two
    contact phases the look-ahead fragment decides: if the current
    constraint blocks the next phase's motion, that motion must break the
    contact first.
    """
    cur = phases[k]
    event = _gripper_event_near(demo, cur.stop)
    if event is not None:
        return event
    nxt = phases[k + 1] if k + 1 < len(phases) else None
    if nxt is None:
        return (EVENT_MAKING if cur.contact_label == "in_contact"
                else EVENT_NON_CONTACT)
    if cur.contact_label == "free":
        return (EVENT_MAKING if nxt.contact_label == "in_contact"
                else EVENT_NON_CONTACT)
    if nxt.contact_label == "free":
        return EVENT_NON_CONTACT
    snap = _snapshot(ex)
    ratio = _combined_ratio(ex, _fragment_goals(ex, demo, nxt))
    _restore(ex, snap)
    return EVENT_BREAKING if ratio < PROBE_RATIO else EVENT_MAKING


def mean_world_force(demo: Demonstration, phase: MotionPhase) -> np.ndarray:
    """Typical world-frame reaction over a phase.

    Component-wise median rather than mean: the first and last few samples
    of a phase straddle transition events whose clamp forces can be several
    times the steady press, and a handful of those rows would visibly tilt
    an averaged direction.
    """
    forces = [wp.pose.rotation() @ wp.wrench.force
              for wp in demo.waypoints[phase.start:phase.stop]]
    return np.median(forces, axis=0)


def plane_from_force(positions: np.ndarray,
                      reaction: np.ndarray) -> ConstraintModel:
    """Plane through collinear samples, oriented by the contact reaction."""
    norm = np.linalg.norm(reaction)
    if norm < 1e-9:
        raise DegenerateGeometry(
            "no contact force available to orient a plane through a line")
    normal = reaction / norm
    centroid = positions.mean(axis=0)
    residual = float(np.sqrt(np.mean(((positions - centroid) @ normal) ** 2)))
    return ConstraintModel(kind="plane", axis=normal, point=centroid,
                           residual=residual)


def fit_phase_model(demo: Demonstration,
                    phase: MotionPhase) -> tuple[ConstraintModel, bool]:
    """Fit a constraint model to one in-contact phase.

    Returns the model and whether it is ambiguous: a straight path fits a
    line, but only a probe can tell a channel from a free slide across a
    surface, so collinear phases come back flagged for probing.
    """
    positions = demo.positions()[phase.start:phase.stop]
    quats = demo.quats()[phase.start:phase.stop]
    ranking = classify_phase(quats)
    if ranking.candidates[0] == "rotation":
        return fit_revolute(positions, quats), False
    s = np.linalg.svd(positions - positions.mean(axis=0), compute_uv=False)
    if s[1] < max(1e-10, COLLINEAR_RATIO * s[0]):
        return fit_line(positions), True
    reaction = mean_world_force(demo, phase)
    return fit_plane(positions, contact_force=-reaction), False


def _replay_to(ex: Execution, demo: Demonstration, start: int,
               stop: int) -> None:
    """Re-drive the recorded path from waypoint ``start`` up to ``stop``,
    applying gripper commands where the recording crossed half open."""
    ctrl = _replay_controller()
    for i in range(start + 1, stop + 1):
        wp = demo.waypoints[i]
        if (wp.gripper > 0.5) != (ex.sim.gripper > 0.5):
            ex.set_gripper(wp.gripper)
        ex.drive(wp.pose, limiter=False, controller=ctrl,
                 max_ticks=_goal_budget(ex, wp.pose, ctrl),
                 tol_lin=5e-4, tol_ang=5e-3)


def augment_demonstration(world: ConstraintWorld, demo: Demonstration,
                          phases: Optional[list] = None,
                          noise_sigma: float = 0.0,
                          rng: Optional[np.random.Generator] = None) -> list:
    """Label every phase by replaying the demonstration once.

    The replay pauses at each phase midpoint to fit and, where ambiguous,
    probe the constraint model, then runs the transition check for the
    boundary ahead.  Returns new ``MotionPhase`` records with ``ec_type``,
    ``model``, ``terminal_event``, and ``reference_cloud_id`` filled in.
    """
    if phases is None:
        phases = segment(demo)
    if rng is None:
        rng = np.random.default_rng(0)
    first = demo.waypoints[0]
    ex = Execution(world, initial_state(first.pose, first.gripper), rng=rng)
    cursor = 0
    labeled = []
    for k, ph in enumerate(phases):
        mid = max((ph.start + ph.stop) // 2, cursor)
        _replay_to(ex, demo, cursor, mid)
        cursor = mid
        if ph.contact_label == "in_contact":
            model, ambiguous = fit_phase_model(demo, ph)
            if ambiguous:
                plan = disambiguate(ex, model, noise_sigma=noise_sigma,
                                    rng=rng)
                if not plan.constrained:
                    model = plane_from_force(
                        demo.positions()[ph.start:ph.stop],
                        mean_world_force(demo, ph))
            ec_type = model.kind
            reference = None
        else:
            model = None
            ec_type = "free_space"
            reference = select_reference_frame(demo, ph)
        event = verify_transition(ex, demo, phases, k)
        labeled.append(replace(ph, ec_type=ec_type, model=model,
                               terminal_event=event,
                               reference_cloud_id=reference))
    return labeled


def score_features(views: list) -> list:
    """Stability of each feature across a sweep of viewpoints.

    A feature rigidly attached to the scene reprojects to the same point
    from every view; one that rides on the camera or the gripper smears
    out.  Spread is the mean distance from the per-feature median position,
    mapped through a falling exponential so a centimetre of smear is worth
    roughly one e-fold.
    """
    if not views:
        raise ValidationError("feature scoring needs at least one view")
    by_id: dict = {}
    for view in views:
        for idx in range(len(view)):
            by_id.setdefault(int(view.ids[idx]), []).append(
                view.positions[idx])
    out = []
    for fid in sorted(by_id):
        pts = np.asarray(by_id[fid])
        center = np.median(pts, axis=0)
        spread = float(np.mean(np.linalg.norm(pts - center, axis=1)))
        out.append(FeatureScore(feature_id=fid, spread=spread,
                                score=float(np.exp(-spread / SCORE_SCALE))))
    return out


def filter_features(cloud: FeatureCloud, scores: list,
                    min_score: float = MIN_SCORE) -> FeatureCloud:
    """Subset of ``cloud`` whose features scored at least ``min_score``."""
    score_by_id = {s.feature_id: s.score for s in scores}
    kept_scores = np.array([score_by_id.get(int(fid), 0.0)
                            for fid in cloud.ids])
    mask = kept_scores >= min_score
    if not np.any(mask):
        raise EmptyCloud(
            f"no feature in {cloud.id!r} scored at least {min_score}")
    return FeatureCloud(cloud.id, cloud.positions[mask],
                        cloud.descriptors[mask], cloud.ids[mask],
                        kept_scores[mask])
