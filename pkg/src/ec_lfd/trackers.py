"""Online constraint trackers used during in-contact execution.

The prismatic tracker is a particle filter over the direction of the
admissible translation (polar/azimuth angles on the unit sphere). The
revolute tracker is an extended Kalman filter over joint axis direction,
a point on the axis, the joint angle and its rate; its measurement is the
exponential-coordinate motion of the end-effector relative to the pose at
which the constraint was engaged, T = exp(z) * T_init.

Both trackers only ingest a measurement when the end-effector actually
moved since the last accepted one; skipped steps leave the belief to spread
through process noise, which drives exploration when jammed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraint_fit import ConstraintModel
from .errors import DivergedFilter, ValidationError
from .se3 import Pose, Twist, dir_to_spherical, exp_map, spherical_to_dir


@dataclass
class PFConfig:
    n_particles: int = 200
    init_sigma: float = np.deg2rad(5.0)      # spread around the fitted axis
    process_sigma: float = np.deg2rad(2.0)   # per-step angle jitter
    kappa: float = 50.0                      # directional likelihood sharpness
    update_threshold: float = 0.003          # m of motion required to weight


class PrismaticPF:
    """Particle filter over the admissible translation direction."""

    def __init__(self, model: ConstraintModel, cfg: PFConfig, rng: np.random.Generator):
        if model.kind != "translation":
            raise ValidationError(f"prismatic tracker needs a translation model, got {model.kind}")
        self.cfg = cfg
        self.rng = rng
        theta0, phi0 = dir_to_spherical(model.axis)
        n = cfg.n_particles
        if n < 1:
            raise ValidationError("need at least one particle")
        if n == 1:
            self.theta = np.array([theta0])
            self.phi = np.array([phi0])
        else:
            self.theta = theta0 + rng.normal(0, cfg.init_sigma, n)
            self.phi = phi0 + rng.normal(0, cfg.init_sigma, n)
        self.weights = np.full(n, 1.0 / n)

    def directions(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.column_stack([st * np.cos(self.phi),
                                st * np.sin(self.phi),
                                np.cos(self.theta)])

    def mean_direction(self) -> np.ndarray:
        m = (self.weights[:, None] * self.directions()).sum(axis=0)
        n = np.linalg.norm(m)
        if n == 0:
            return np.array([0.0, 0.0, 1.0])
        return m / n

    def circular_variance(self) -> float:
        m = (self.weights[:, None] * self.directions()).sum(axis=0)
        return float(1.0 - np.linalg.norm(m))

    def _systematic_resample(self) -> None:
        n = len(self.weights)
        positions = (np.arange(n) + self.rng.uniform()) / n
        cumw = np.cumsum(self.weights)
        cumw[-1] = 1.0
        idx = np.searchsorted(cumw, positions)
        self.theta = self.theta[idx].copy()
        self.phi = self.phi[idx].copy()
        self.weights = np.full(n, 1.0 / n)

    def step(self, observed_displacement: np.ndarray) -> tuple[np.ndarray, bool]:
        """Predict, weight on the observed motion if it was informative,
        and return (sampled direction, updated?)."""
        cfg = self.cfg
        n = len(self.theta)
        self.theta = self.theta + self.rng.normal(0, cfg.process_sigma, n)
        self.phi = self.phi + self.rng.normal(0, cfg.process_sigma, n)
        disp = np.asarray(observed_displacement, dtype=float)
        dist = np.linalg.norm(disp)
        updated = False
        if dist > cfg.update_threshold:
            d = disp / dist
            cosang = self.directions() @ d
            logw = cfg.kappa * cosang
            logw -= logw.max()
            w = self.weights * np.exp(logw)
            total = w.sum()
            if total <= 0 or not np.isfinite(total):
                w = np.full(n, 1.0 / n)
            else:
                w = w / total
            self.weights = w
            self._systematic_resample()
            updated = True
        idx = self.rng.choice(n, p=self.weights)
        return self.directions()[idx], updated


@dataclass
class EKFConfig:
    # measurement noise (exponential coordinates)
    meas_sigma_ang: float = 0.01             # rad
    meas_sigma_lin: float = 0.002            # m
    # process noise density, applied as Q*dt in predict
    process_axis: float = 1e-6
    process_point: float = 1e-6
    process_angle: float = 1e-4
    process_rate: float = 1e-4
    # initial covariance
    init_sigma_axis: float = 0.35            # per axis component
    init_sigma_point: float = 0.10           # m
    init_sigma_angle: float = 0.02           # rad
    init_sigma_rate: float = 0.05
    dq_command: float = np.deg2rad(3.0)      # commanded joint increment
    lin_update_threshold: float = 0.01       # m
    ang_update_threshold: float = np.deg2rad(2.0)
    cond_limit: float = 1e12
    eig_floor: float = 1e-12


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def ekf_measurement(state: np.ndarray) -> np.ndarray:
    """Screw-motion measurement [angular, linear] for state
    [u(3), p(3), q, qdot]."""
    u = state[:3]
    p = state[3:6]
    q = state[6]
    return np.concatenate([q * u, -q * np.cross(u, p)])


def ekf_jacobian(state: np.ndarray) -> np.ndarray:
    u = state[:3]
    p = state[3:6]
    q = state[6]
    H = np.zeros((6, 8))
    H[:3, :3] = q * np.eye(3)
    H[:3, 6] = u
    H[3:, :3] = q * _skew(p)
    H[3:, 3:6] = -q * _skew(u)
    H[3:, 6] = -np.cross(u, p)
    return H


class RevoluteEKF:
    """EKF over (axis direction, axis point, joint angle, joint rate)."""

    def __init__(self, model: ConstraintModel, cfg: EKFConfig):
        if model.kind != "rotation":
            raise ValidationError(f"revolute tracker needs a rotation model, got {model.kind}")
        self.cfg = cfg
        self.mean = np.concatenate([model.axis, model.point, [0.0, 0.0]])
        self.cov = np.diag([cfg.init_sigma_axis ** 2] * 3 +
                           [cfg.init_sigma_point ** 2] * 3 +
                           [cfg.init_sigma_angle ** 2, cfg.init_sigma_rate ** 2])
        self._last_ang = np.zeros(3)
        self._last_lin = np.zeros(3)

    @property
    def axis(self) -> np.ndarray:
        return self.mean[:3]

    @property
    def point(self) -> np.ndarray:
        return self.mean[3:6]

    @property
    def angle(self) -> float:
        return float(self.mean[6])

    def predict(self, dt: float) -> None:
        if dt <= 0:
            raise ValidationError("dt must be positive")
        cfg = self.cfg
        F = np.eye(8)
        F[6, 7] = dt
        Q = np.diag([cfg.process_axis] * 3 + [cfg.process_point] * 3 +
                    [cfg.process_angle, cfg.process_rate])
        self.mean = F @ self.mean
        self.cov = F @ self.cov @ F.T + Q * dt
        self._condition()

    def _condition(self) -> None:
        c = 0.5 * (self.cov + self.cov.T)
        vals, vecs = np.linalg.eigh(c)
        vals = np.maximum(vals, self.cfg.eig_floor)
        self.cov = (vecs * vals) @ vecs.T

    def update(self, observed_motion: Twist) -> bool:
        """Ingest motion relative to T_init; returns False when the increment
        since the last accepted measurement is below the motion thresholds."""
        cfg = self.cfg
        z_ang = np.asarray(observed_motion.angular, dtype=float)
        z_lin = np.asarray(observed_motion.linear, dtype=float)
        d_ang = np.linalg.norm(z_ang - self._last_ang)
        d_lin = np.linalg.norm(z_lin - self._last_lin)
        if d_lin <= cfg.lin_update_threshold and d_ang <= cfg.ang_update_threshold:
            return False
        z = np.concatenate([z_ang, z_lin])
        H = ekf_jacobian(self.mean)
        R = np.diag([cfg.meas_sigma_ang ** 2] * 3 + [cfg.meas_sigma_lin ** 2] * 3)
        S = H @ self.cov @ H.T + R
        if np.linalg.cond(S) > cfg.cond_limit:
            raise DivergedFilter(f"innovation condition number exceeds {cfg.cond_limit:g}")
        K = self.cov @ H.T @ np.linalg.inv(S)
        innovation = z - ekf_measurement(self.mean)
        self.mean = self.mean + K @ innovation
        IKH = np.eye(8) - K @ H
        self.cov = IKH @ self.cov @ IKH.T + K @ R @ K.T
        self._condition()
        n = np.linalg.norm(self.mean[:3])
        if n > 0:
            self.mean[:3] = self.mean[:3] / n
        self._canonicalize_sign()
        self._last_ang = z_ang.copy()
        self._last_lin = z_lin.copy()
        return True

    def _canonicalize_sign(self) -> None:
        # (u, q, qdot) -> (-u, -q, -qdot) leaves the measurement unchanged,
        # so pin the representative with q >= 0
        if self.mean[6] >= 0:
            return
        J = np.diag([-1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0])
        self.mean = J @ self.mean
        self.cov = J @ self.cov @ J.T

    def sample_command(self, base: Pose, rng: np.random.Generator) -> Pose:
        """One joint increment about an axis drawn from the belief.

        The increment is applied to ``base``, the current realized pose, so
        an exploratory draw starts on the constraint instead of replaying
        the whole arc from the entry pose.
        """
        s = rng.multivariate_normal(self.mean, self.cov, method="eigh")
        n = np.linalg.norm(s[:3])
        if n > 0:
            s[:3] = s[:3] / n
        s[6] = self.cfg.dq_command
        z = ekf_measurement(s)
        motion = exp_map(Twist(angular=z[:3], linear=z[3:]))
        return motion @ base

    def command_from_mean(self, base: Pose, dq: float) -> Pose:
        """One joint increment about the mean axis, applied to ``base``."""
        s = self.mean.copy()
        s[6] = dq
        z = ekf_measurement(s)
        return exp_map(Twist(angular=z[:3], linear=z[3:])) @ base
