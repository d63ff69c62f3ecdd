"""Compliant execution primitives over environmental-contact models.

Each primitive replays one demonstrated motion phase under the wrench-limited
controller and watches for the contact event that should terminate it:

* free space  -- waypoint replay, scheduled gripper actions, then an optional
  straight-line funnel move toward the next constraint until touch.
* plane       -- press-biased replay along the fitted surface, a timed press,
  an optional feature-servo re-replay, and an outward spiral search.
* translation -- particle-filter guided steps along the fitted direction.
* rotation    -- EKF guided arc steps about the fitted axis.

Event vocabulary is shared with :mod:`ec_lfd.demo`: ``making_contact`` when a
new constraint engages (sustained tangential force, or tracker measurements
freezing while the controller pushes), ``breaking_contact`` when the realized
motion leaves the current constraint (a drop through the surface level or a
sideways pop off the fitted direction), ``non_contact`` when a search is
exhausted, and the two gripper events.

Positions, models, and trajectories are expressed in current world
coordinates; callers transform demonstration-frame primitives first (see
:meth:`EcPrimitive.transformed`).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .constraint_fit import ConstraintModel
from .controller import ControllerConfig, control_step, interpolate_step
from .demo import (EVENT_BREAKING, EVENT_GRASP, EVENT_MAKING,
                   EVENT_NON_CONTACT, EVENT_RELEASE, Demonstration,
                   FeatureCloud, MotionPhase, Waypoint)
from .errors import InsufficientMatches, ValidationError
from .se3 import (Pose, Twist, Wrench, exp_map, log_map, quat_geodesic_angle,
                  rotation_about_axis)
from .trackers import EKFConfig, PFConfig, PrismaticPF, RevoluteEKF
from .world import ConstraintWorld, SimState, observe, set_gripper, world_step

PRIMITIVE_KINDS = ("free", "plane", "translation", "rotation")


def _contact_controller() -> ControllerConfig:
    return ControllerConfig(f_max=np.array([15.0, 15.0, 15.0, 2.0, 2.0, 2.0]))


def _free_controller() -> ControllerConfig:
    return ControllerConfig(
        v_max=np.array([0.08, 0.08, 0.08, 1.2, 1.2, 1.2]),
        f_max=np.array([15.0, 15.0, 15.0, 2.0, 2.0, 2.0]))


@dataclass
class ExecConfig:
    """Tunables for primitive execution.

    ``controller`` caps speed and wrench during contact-rich motion;
    ``free_controller`` is the faster profile used only for free-space
    waypoint replay.  Violation accounting always measures against
    ``controller.f_max``.
    """

    controller: ControllerConfig = field(default_factory=_contact_controller)
    free_controller: ControllerConfig = field(default_factory=_free_controller)
    pf: PFConfig = field(default_factory=PFConfig)
    # The prior is deliberately loose: a hinge model fitted from one noisy
    # demonstration can be tens of degrees and several centimeters off, and
    # the belief doubles as the exploration scale when commands freeze.
    ekf: EKFConfig = field(default_factory=EKFConfig)
    making_force: float = 5.0          # N of sustained tangential force
    making_ticks: int = 50             # ticks the force must persist
    making_suppress_drop: float = 5e-4  # m below touch level that mutes making
    stall_updates: int = 30            # tracker skips before "jammed"
    break_displacement: float = 0.008  # m of off-model realized motion
    press_bias: float = 0.012          # m commanded below a fitted plane
    press_ticks: int = 800
    spiral_radius: float = 0.02
    spiral_spacing: float = 0.002
    funnel_force: float = 1.0          # N that counts as first touch
    funnel_distance: float = 0.04
    step_ahead: float = 0.005          # m per guided translation attempt
    max_attempts: int = 600
    wiggle_freq: float = 0.4           # Hz of the optional yaw weave
    # A regulated press parks at the cap, so only force sustained well
    # beyond it marks a crush rather than normal compliant contact.
    violation_fraction: float = 1.2
    violation_ticks: int = 50
    record_every: int = 10
    goal_tol_lin: float = 2e-4
    goal_tol_ang: float = 2e-3
    stall_window: int = 30
    stall_tol: float = 1e-4


@dataclass
class EcPrimitive:
    """One executable policy node: a phase's trajectory plus its contact model.

    ``gripper_actions`` pairs a trajectory index with a target opening; free
    nodes fire them when the replay passes that index, contact nodes after
    the mechanical loop ends.  ``funnel_into`` carries the successor node's
    model so a free node can close the last few millimetres by feel.
    """

    kind: str
    trajectory: list
    model: Optional[ConstraintModel] = None
    reference_cloud: Optional[FeatureCloud] = None
    gripper_actions: list = field(default_factory=list)
    demo_entry: Optional[Pose] = None
    wiggle: float = 0.0
    funnel_into: Optional[ConstraintModel] = None

    def __post_init__(self):
        if self.kind not in PRIMITIVE_KINDS:
            raise ValidationError(f"unknown primitive kind {self.kind!r}")
        if self.kind in ("translation", "rotation") and self.model is None:
            raise ValidationError(f"{self.kind} primitive requires a model")
        if not self.trajectory:
            raise ValidationError("primitive trajectory is empty")

    def transformed(self, T: Pose) -> "EcPrimitive":
        """Map trajectory, models, and entry pose by a world transform."""
        wps = [replace(wp, pose=T @ wp.pose) for wp in self.trajectory]
        return EcPrimitive(
            kind=self.kind,
            trajectory=wps,
            model=self.model.transformed(T) if self.model else None,
            reference_cloud=self.reference_cloud,
            gripper_actions=list(self.gripper_actions),
            demo_entry=T @ self.demo_entry if self.demo_entry else None,
            wiggle=self.wiggle,
            funnel_into=(self.funnel_into.transformed(T)
                         if self.funnel_into else None))


@dataclass
class PrimitiveOutcome:
    event: str
    ticks: int
    attempts: int = 0
    info: dict = field(default_factory=dict)


def spiral_trajectory(radius: float, spacing: float) -> np.ndarray:
    """Planar Archimedean spiral offsets, starting at the origin.

    Consecutive points are about ``spacing`` apart along the arc and the
    radius grows by ``spacing`` per turn, out to ``radius``.
    """
    if radius <= 0 or spacing <= 0:
        raise ValidationError("spiral radius and spacing must be positive")
    b = spacing / (2.0 * np.pi)
    pts = [(0.0, 0.0)]
    s = spacing
    while True:
        theta = np.sqrt(2.0 * s / b)
        r = b * theta
        if r > radius:
            break
        pts.append((r * np.cos(theta), r * np.sin(theta)))
        s += spacing
    return np.array(pts)


def _tangent_basis(n: np.ndarray):
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    e = np.zeros(3)
    e[int(np.argmin(np.abs(n)))] = 1.0
    t1 = e - (e @ n) * n
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(n, t1)


def align_features(reference: FeatureCloud, current: FeatureCloud,
                   min_matches: int = 3) -> Pose:
    """Rigid transform mapping reference-frame points into the current frame.

    Features are paired by mutual nearest descriptor distance; the pose is
    the least-squares rotation/translation over the matched positions.
    """
    d = cdist(reference.descriptors, current.descriptors)
    fwd = np.argmin(d, axis=1)
    bwd = np.argmin(d, axis=0)
    pairs = [(i, j) for i, j in enumerate(fwd) if bwd[j] == i]
    if len(pairs) < min_matches:
        raise InsufficientMatches(
            f"{len(pairs)} mutual feature matches, need {min_matches}")
    idx = np.array(pairs)
    p = reference.positions[idx[:, 0]]
    q = current.positions[idx[:, 1]]
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    h = (p - pc).T @ (q - qc)
    u, _, vt = np.linalg.svd(h)
    sign = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, sign]) @ u.T
    return Pose.from_matrix_parts(r, qc - r @ pc)


def select_reference_frame(demo: Demonstration,
                           phase: MotionPhase) -> Optional[str]:
    """Most common feature-frame name recorded inside a phase, if any."""
    names = [wp.feature_frame
             for wp in demo.waypoints[phase.start:phase.stop]
             if wp.feature_frame is not None]
    if not names:
        return None
    return Counter(names).most_common(1)[0][0]


class Execution:
    """Mutable state shared by all primitives of one trial.

    Owns the commanded pose, the simulator state, the running force trace
    (one row per ``record_every`` ticks), per-axis force-limit violation
    counts, and the commanded-pose trace used by diagnostics.
    """

    def __init__(self, world: ConstraintWorld, sim: SimState,
                 cfg: Optional[ExecConfig] = None,
                 rng: Optional[np.random.Generator] = None):
        self.world = world
        self.sim = sim
        self.cfg = cfg if cfg is not None else ExecConfig()
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.cmd = sim.ee_pose.copy()
        self.wrench = Wrench()
        self.tick = 0
        self.records: list = []
        self.cmd_trace: list = []
        self.events: list = []
        self.peak_wrench = np.zeros(6)
        self.violations = 0
        self._over_run = np.zeros(6, dtype=int)

    @property
    def dt(self) -> float:
        return self.cfg.controller.dt

    def observe(self, cloud_id: str = "scene") -> FeatureCloud:
        return observe(self.world, self.sim, cloud_id=cloud_id)

    def set_gripper(self, g: float) -> str:
        self.sim = set_gripper(self.world, self.sim, g)
        event = EVENT_GRASP if g > 0.5 else EVENT_RELEASE
        self.events.append((self.tick, event))
        return event

    def step_toward(self, goal: Pose, limiter: bool = True,
                    controller: Optional[ControllerConfig] = None):
        ctrl = controller if controller is not None else self.cfg.controller
        if limiter:
            self.cmd = control_step(self.cmd, goal, self.wrench, ctrl)
        else:
            step = interpolate_step(self.cmd, goal, ctrl)
            self.cmd = self.cmd @ exp_map(Twist.from_vec6(step))
        self.sim, self.wrench = world_step(self.world, self.sim, self.cmd,
                                           ctrl)
        self.tick += 1
        vec = self.wrench.as_vec6()
        np.maximum(self.peak_wrench, np.abs(vec), out=self.peak_wrench)
        limit = self.cfg.violation_fraction * np.asarray(
            self.cfg.controller.f_max, dtype=float)
        self._over_run = np.where(np.abs(vec) >= limit, self._over_run + 1, 0)
        self.violations += int(np.count_nonzero(
            self._over_run == self.cfg.violation_ticks))
        if self.tick % self.cfg.record_every == 0:
            self.records.append(
                np.concatenate([[self.tick * self.dt], vec]))
            self.cmd_trace.append((self.tick, self.cmd.copy()))

    def reached(self, goal: Pose, tol_lin: Optional[float] = None,
                tol_ang: Optional[float] = None) -> bool:
        tol_lin = self.cfg.goal_tol_lin if tol_lin is None else tol_lin
        tol_ang = self.cfg.goal_tol_ang if tol_ang is None else tol_ang
        return (np.linalg.norm(goal.trans - self.cmd.trans) < tol_lin
                and quat_geodesic_angle(goal.quat, self.cmd.quat) < tol_ang)

    def drive(self, goal: Pose, limiter: bool = True, max_ticks: int = 400,
              stall_exit: bool = True,
              on_tick: Optional[Callable[[], Optional[str]]] = None,
              controller: Optional[ControllerConfig] = None,
              tol_lin: Optional[float] = None,
              tol_ang: Optional[float] = None) -> str:
        """Step toward a fixed goal until reached, stalled, or out of budget.

        The stall exit fires when the commanded position moves less than
        ``stall_tol`` over ``stall_window`` ticks, which is how a
        wrench-limited push against a rigid constraint ends.  ``on_tick``
        may return an event name to abort the drive early.
        """
        anchor = self.cmd.trans.copy()
        anchor_tick = self.tick
        for _ in range(max_ticks):
            self.step_toward(goal, limiter=limiter, controller=controller)
            if on_tick is not None:
                event = on_tick()
                if event is not None:
                    return event
            if self.reached(goal, tol_lin, tol_ang):
                return "reached"
            if stall_exit and self.tick - anchor_tick >= self.cfg.stall_window:
                if np.linalg.norm(self.cmd.trans - anchor) < self.cfg.stall_tol:
                    return "stalled"
                anchor = self.cmd.trans.copy()
                anchor_tick = self.tick
        return "budget"


def _goal_budget(ex: Execution, goal: Pose, ctrl: ControllerConfig) -> int:
    v = float(np.min(np.asarray(ctrl.v_max, dtype=float)[:3]))
    w = float(np.min(np.asarray(ctrl.v_max, dtype=float)[3:]))
    gap = np.linalg.norm(goal.trans - ex.cmd.trans)
    ang = quat_geodesic_angle(goal.quat, ex.cmd.quat)
    return int(3.0 * max(gap / (v * ctrl.dt), ang / (w * ctrl.dt))) + 30


def _apply_post_actions(ex: Execution, prim: EcPrimitive,
                        event: str) -> str:
    """Fire a contact node's queued gripper actions; the last one names
    the node's outcome event."""
    if not prim.gripper_actions:
        return event
    for _, g in sorted(prim.gripper_actions):
        event = ex.set_gripper(g)
    return event


def _funnel(ex: Execution, model: ConstraintModel, cfg: ExecConfig) -> bool:
    """Straight push toward a constraint until first touch or engagement."""
    direction = -model.axis if model.kind == "plane" else model.axis
    goal = Pose(ex.cmd.quat.copy(),
                ex.cmd.trans + direction * cfg.funnel_distance)

    def touched() -> Optional[str]:
        if ex.sim.engagement is not None:
            return "touch"
        if np.linalg.norm(ex.wrench.force) > cfg.funnel_force:
            return "touch"
        return None

    budget = _goal_budget(ex, goal, cfg.controller)
    status = ex.drive(goal, limiter=True, max_ticks=budget, on_tick=touched)
    return status == "touch"


def exec_free_space(ex: Execution, prim: EcPrimitive,
                    cfg: Optional[ExecConfig] = None) -> PrimitiveOutcome:
    """Replay a free-space phase and settle the hand for the next node."""
    cfg = cfg if cfg is not None else ex.cfg
    t0 = ex.tick
    actions = sorted(prim.gripper_actions)
    ai = 0
    last_event = None
    for i, wp in enumerate(prim.trajectory):
        while ai < len(actions) and actions[ai][0] <= i:
            last_event = ex.set_gripper(actions[ai][1])
            ai += 1
        budget = _goal_budget(ex, wp.pose, cfg.free_controller)
        ex.drive(wp.pose, limiter=True, max_ticks=budget, stall_exit=False,
                 controller=cfg.free_controller,
                 tol_lin=5e-4, tol_ang=5e-3)
    while ai < len(actions):
        last_event = ex.set_gripper(actions[ai][1])
        ai += 1

    info = {"funnel": False, "touch": False}
    if actions:
        event = last_event
    else:
        touching = (ex.sim.engagement is not None
                    or np.linalg.norm(ex.wrench.force) > cfg.funnel_force)
        if touching:
            event = EVENT_MAKING
        elif prim.funnel_into is not None:
            info["funnel"] = True
            info["touch"] = _funnel(ex, prim.funnel_into, cfg)
            event = EVENT_MAKING if info["touch"] else EVENT_NON_CONTACT
        else:
            event = EVENT_NON_CONTACT
    return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                            attempts=len(prim.trajectory), info=info)


def exec_plane(ex: Execution, prim: EcPrimitive,
               cfg: Optional[ExecConfig] = None) -> PrimitiveOutcome:
    """Press-biased sliding on a fitted plane with spiral recovery.

    Watches three signals once first touch is seen: the normal reaction
    staying below ``funnel_force`` for ``making_ticks`` while the press
    leans on the plane (the constraint vanished, so contact broke), the
    realized level dropping more than ``break_displacement`` below the
    touch level (same verdict, reached by sinking), and tangential force
    above ``making_force`` for ``making_ticks`` (a new lateral
    constraint).  If the replay, press, optional feature servo, and spiral
    all finish quietly the node reports ``non_contact``.
    """
    cfg = cfg if cfg is not None else ex.cfg
    if prim.model is None or prim.model.kind != "plane":
        raise ValidationError("plane primitive requires a plane model")
    n = prim.model.axis / np.linalg.norm(prim.model.axis)
    point = prim.model.point
    t1, t2 = _tangent_basis(n)
    t0 = ex.tick
    state = {"touched": False, "level0": 0.0, "run": 0, "drop": 0,
             "stage": "replay"}

    def level() -> float:
        return float((ex.sim.ee_pose.trans - point) @ n)

    def check() -> Optional[str]:
        f_world = ex.cmd.rotation() @ ex.wrench.force
        if not state["touched"]:
            if np.linalg.norm(f_world) > cfg.funnel_force:
                state["touched"] = True
                state["level0"] = level()
            return None
        lvl = level()
        if lvl < state["level0"] - cfg.break_displacement:
            return EVENT_BREAKING
        if abs(float(f_world @ n)) < cfg.funnel_force:
            # The press leans on the plane the whole time, so losing the
            # normal reaction means this constraint is gone: the slide
            # either dropped into a capture gate or ran off the surface.
            # Whatever lateral force remains belongs to the successor
            # constraint, not to a new wall on this plane.
            state["drop"] += 1
            state["run"] = 0
            if state["drop"] >= cfg.making_ticks:
                return EVENT_BREAKING
            return None
        state["drop"] = 0
        if lvl < state["level0"] - cfg.making_suppress_drop:
            # Sinking through the surface: lateral force is the wall of
            # whatever we are falling into, not a new lateral constraint.
            state["run"] = 0
            return None
        if ex.sim.engagement is not None and ex.sim.engagement.snagged:
            # Caught on a capture mouth: the target constraint is half
            # made, and the yaw weave exists to finish it, so the snag's
            # reaction must not count as a new lateral contact.
            state["run"] = 0
            return None
        tangential = f_world - (f_world @ n) * n
        if np.linalg.norm(tangential) > cfg.making_force:
            state["run"] += 1
        else:
            state["run"] = 0
        if state["run"] >= cfg.making_ticks:
            return EVENT_MAKING
        return None

    def biased(p: np.ndarray) -> np.ndarray:
        depth = float((p - point) @ n)
        return p - n * (depth + cfg.press_bias)

    def goal_for(pose: Pose) -> Pose:
        quat = pose.quat
        if prim.wiggle > 0.0:
            angle = prim.wiggle * np.sin(
                2.0 * np.pi * cfg.wiggle_freq * (ex.tick - t0) * ex.dt)
            quat = (rotation_about_axis(n, angle) @ Pose(quat)).quat
        return Pose(quat, biased(pose.trans))

    def run_to(pose: Pose, budget: int, stall_exit: bool = True) -> Optional[str]:
        # The press bias keeps the normal component of the goal unreachable
        # on purpose, so a stalled commanded pose, not only arrival, moves
        # the replay along.
        anchor = ex.cmd.trans.copy()
        anchor_tick = ex.tick
        for _ in range(budget):
            goal = goal_for(pose)
            ex.step_toward(goal, limiter=True)
            event = check()
            if event is not None:
                return event
            if ex.reached(goal):
                return None
            if stall_exit and ex.tick - anchor_tick >= cfg.stall_window:
                if np.linalg.norm(ex.cmd.trans - anchor) < cfg.stall_tol:
                    return None
                anchor = ex.cmd.trans.copy()
                anchor_tick = ex.tick
        return None

    def replay(poses) -> Optional[str]:
        for pose in poses:
            budget = _goal_budget(ex, goal_for(pose), cfg.controller)
            event = run_to(pose, budget)
            if event is not None:
                return event
        return None

    def finish(event: str) -> PrimitiveOutcome:
        event = _apply_post_actions(ex, prim, event)
        return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                                info={"stage": state["stage"],
                                      "touch_level": state["level0"]})

    event = replay([wp.pose for wp in prim.trajectory])
    if event is not None:
        return finish(event)

    state["stage"] = "press"
    last = prim.trajectory[-1].pose
    press_budget = cfg.press_ticks
    if prim.wiggle > 0.0:
        # A weave can only clear a snagged capture gate if the dwell spans
        # a full oscillation.
        press_budget = max(press_budget,
                           int(np.ceil(1.0 / (cfg.wiggle_freq * ex.dt)))
                           + 500)
    event = run_to(last, press_budget, stall_exit=False)
    if event is not None:
        return finish(event)

    if prim.reference_cloud is not None:
        state["stage"] = "servo"
        current = ex.observe(prim.reference_cloud.id)
        correction = align_features(prim.reference_cloud, current)
        event = replay([correction @ wp.pose for wp in prim.trajectory])
        if event is not None:
            return finish(event)
        last = correction @ last

    state["stage"] = "spiral"
    base = last.trans
    for ox, oy in spiral_trajectory(cfg.spiral_radius, cfg.spiral_spacing):
        target = Pose(last.quat, base + t1 * ox + t2 * oy)
        event = run_to(target, 60)
        if event is not None:
            return finish(event)
    state["stage"] = "exhausted"
    return finish(EVENT_NON_CONTACT)


def exec_translation(ex: Execution, prim: EcPrimitive,
                     cfg: Optional[ExecConfig] = None) -> PrimitiveOutcome:
    """Guided sliding along a fitted direction.

    Each attempt commands one ``step_ahead`` move along a direction drawn
    from the particle filter, holding the entry orientation.  Steps launch
    from the realized pose, not the commanded one, so a lateral offset
    inherited from the entry transform relaxes instead of riding along as a
    parked side load.  The realized step feeds the filter back.  A realized
    step with more than ``break_displacement`` off the fitted forward
    direction is a pop into a new constraint (breaking); ``stall_updates``
    consecutive uninformative steps mean the slide is jammed (making).
    """
    cfg = cfg if cfg is not None else ex.cfg
    u = prim.model.axis / np.linalg.norm(prim.model.axis)
    pf = PrismaticPF(prim.model, cfg.pf, ex.rng)
    hold = ex.cmd.quat.copy()
    t0 = ex.tick
    direction = pf.mean_direction()
    skips = 0
    last_real = ex.sim.ee_pose.trans.copy()
    budget = int(3.0 * cfg.step_ahead
                 / (float(np.min(cfg.controller.v_max[:3])) * ex.dt)) + 30
    for attempt in range(1, cfg.max_attempts + 1):
        goal = Pose(hold, ex.sim.ee_pose.trans + direction * cfg.step_ahead)
        ex.drive(goal, limiter=True, max_ticks=budget)
        step = ex.sim.ee_pose.trans - last_real
        last_real = ex.sim.ee_pose.trans.copy()
        forward = max(float(step @ u), 0.0)
        if np.linalg.norm(step - forward * u) > cfg.break_displacement:
            event = _apply_post_actions(ex, prim, EVENT_BREAKING)
            return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                                    attempts=attempt)
        direction, updated = pf.step(step)
        skips = 0 if updated else skips + 1
        if skips >= cfg.stall_updates:
            event = _apply_post_actions(ex, prim, EVENT_MAKING)
            return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                                    attempts=attempt,
                                    info={"spread": pf.circular_variance()})
    # Attempt cap: treat an endless slide as jammed rather than looping.
    event = _apply_post_actions(ex, prim, EVENT_MAKING)
    return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                            attempts=cfg.max_attempts,
                            info={"capped": True})


def exec_rotation(ex: Execution, prim: EcPrimitive,
                  cfg: Optional[ExecConfig] = None) -> PrimitiveOutcome:
    """Guided arc motion about a fitted revolute axis.

    Every attempt commands one joint increment from the current realized
    pose: about the mean axis while measurements keep arriving, about a
    belief draw after a frozen attempt, so a badly fitted hinge is escaped
    by exploration instead of being pushed on forever.  Measurements are
    cumulative motions from the entry pose, accumulated as per-attempt
    motion logarithms so multi-turn arcs stay unwrapped.  Range ends show
    up as frozen measurements, counted like translation stalls.
    """
    cfg = cfg if cfg is not None else ex.cfg
    ekf = RevoluteEKF(prim.model, cfg.ekf)
    t_init = ex.sim.ee_pose.copy()
    prev = t_init.copy()
    z_ang = np.zeros(3)
    z_lin = np.zeros(3)
    t0 = ex.tick
    skips = 0
    elapsed = 0.1
    budget = 250
    accepted_angle = 0.0
    explore = False
    for attempt in range(1, cfg.max_attempts + 1):
        ekf.predict(max(elapsed, ex.dt))
        base = ex.sim.ee_pose
        if explore:
            goal = ekf.sample_command(base, ex.rng)
        else:
            goal = ekf.command_from_mean(base, ekf.cfg.dq_command)
        tick_in = ex.tick
        ex.drive(goal, limiter=True, max_ticks=budget)
        elapsed = (ex.tick - tick_in) * ex.dt
        cur = ex.sim.ee_pose
        inc = log_map(cur @ prev.inverse())
        z_ang += inc.angular
        z_lin += inc.linear
        prev = cur.copy()
        updated = ekf.update(Twist(angular=z_ang.copy(), linear=z_lin.copy()))
        if updated:
            skips = 0
            accepted_angle = float(ekf.angle)
            explore = False
        else:
            skips += 1
            explore = True
        if skips >= cfg.stall_updates:
            event = _apply_post_actions(ex, prim, EVENT_MAKING)
            return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                                    attempts=attempt,
                                    info={"angle": accepted_angle})
    event = _apply_post_actions(ex, prim, EVENT_MAKING)
    return PrimitiveOutcome(event=event, ticks=ex.tick - t0,
                            attempts=cfg.max_attempts,
                            info={"angle": accepted_angle, "capped": True})


_EXECUTORS = {
    "free": exec_free_space,
    "plane": exec_plane,
    "translation": exec_translation,
    "rotation": exec_rotation,
}


def execute_primitive(ex: Execution, prim: EcPrimitive,
                      cfg: Optional[ExecConfig] = None) -> PrimitiveOutcome:
    return _EXECUTORS[prim.kind](ex, prim, cfg)
