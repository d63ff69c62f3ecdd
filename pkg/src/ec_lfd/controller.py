"""Goal-interpolating pose controller with per-axis wrench limiting.

The commanded pose walks toward a goal pose one clamped body-frame twist
per tick.  Each twist component is then rescaled by how much headroom the
corresponding measured wrench component has left: components near their
force bound slow down smoothly, components past it back out along the
direction the environment pushes.  A joint-torque mapping for the
resulting pose error is included for completeness.

All 6-vectors are ordered [linear, angular] (and [force, torque]).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .se3 import Pose, Twist, Wrench, exp_map, log_map


def _vec6(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (6,):
        raise ValidationError(f"expected a 6-vector, got shape {arr.shape}")
    return arr


def default_gains() -> np.ndarray:
    """Stiffness for full pose tracking: N/m linear, Nm/rad angular."""
    return np.array([1000.0, 1000.0, 1000.0, 200.0, 200.0, 200.0])


def translation_only_gains() -> np.ndarray:
    """Stiffness preset that leaves orientation unconstrained."""
    return np.array([500.0, 500.0, 500.0, 0.0, 0.0, 0.0])


@dataclass
class ControllerConfig:
    kp: np.ndarray = field(default_factory=default_gains)
    kd: np.ndarray = field(default_factory=lambda: np.array(
        [10.0, 10.0, 10.0, 5.0, 5.0, 5.0]))
    v_max: np.ndarray = field(default_factory=lambda: np.array(
        [0.03, 0.03, 0.03, 0.3, 0.3, 0.3]))     # m/s, rad/s
    f_max: np.ndarray = field(default_factory=lambda: np.array(
        [5.0, 5.0, 5.0, 2.0, 2.0, 2.0]))        # N, Nm
    dt: float = 0.001

    def __post_init__(self):
        self.kp = _vec6(self.kp)
        self.kd = _vec6(self.kd)
        self.v_max = _vec6(self.v_max)
        self.f_max = _vec6(self.f_max)
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValidationError("gains must be non-negative")
        if np.any(self.v_max <= 0) or np.any(self.f_max <= 0):
            raise ValidationError("velocity and wrench bounds must be positive")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")


def interpolate_step(current: Pose, goal: Pose, cfg: ControllerConfig) -> np.ndarray:
    """Body-frame twist toward the goal, clamped per axis to v_max * dt."""
    err = log_map(current.inverse() @ goal).as_vec6()
    bound = cfg.v_max * cfg.dt
    return np.clip(err, -bound, bound)


def wrench_limit_step(step: np.ndarray, wrench: Wrench,
                      cfg: ControllerConfig) -> np.ndarray:
    """Rescale a twist by per-axis wrench headroom.

    Components with headroom shrink smoothly as the bound approaches;
    components past the bound move at a headroom-scaled fraction of full
    speed along the direction the environment pushes, which backs the
    commanded pose out of the contact.
    """
    step = _vec6(step)
    f = wrench.as_vec6()
    headroom = cfg.f_max - np.abs(f)
    out = np.empty(6)
    for i in range(6):
        if headroom[i] > 0:
            out[i] = np.tanh(headroom[i]) * step[i]
        else:
            out[i] = np.sign(f[i]) * np.tanh(-headroom[i]) * cfg.v_max[i] * cfg.dt
    return out


def control_step(current: Pose, goal: Pose, wrench: Wrench,
                 cfg: ControllerConfig) -> Pose:
    """One tick of the commanded-pose update."""
    step = interpolate_step(current, goal, cfg)
    limited = wrench_limit_step(step, wrench, cfg)
    return current @ exp_map(Twist.from_vec6(limited))


def torque_command(jacobian: np.ndarray, pose_error: np.ndarray,
                   velocity: np.ndarray, cfg: ControllerConfig,
                   tau_dynamics: np.ndarray | None = None) -> np.ndarray:
    """Joint torques realizing the compliance law J^T (Kp e - Kd v)."""
    J = np.asarray(jacobian, dtype=float)
    if J.ndim != 2 or J.shape[0] != 6:
        raise DimensionMismatch(f"jacobian must be 6 x n, got {J.shape}")
    e = np.asarray(pose_error, dtype=float)
    v = np.asarray(velocity, dtype=float)
    if e.shape != (6,) or v.shape != (6,):
        raise DimensionMismatch("pose error and velocity must be 6-vectors")
    tau = J.T @ (cfg.kp * e - cfg.kd * v)
    if tau_dynamics is not None:
        td = np.asarray(tau_dynamics, dtype=float)
        if td.shape != tau.shape:
            raise DimensionMismatch(
                f"dynamics torque shape {td.shape} != {tau.shape}")
        tau = tau + td
    return tau
