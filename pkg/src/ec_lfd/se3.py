"""Rigid-body poses, twists and wrenches.

Poses are stored as a unit quaternion (w, x, y, z) plus a translation.
Twists carry exponential coordinates split into an angular and a linear
3-vector; the packed 6-vector layout used throughout the package is
[linear, angular], matching the [force, torque] layout of wrenches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AngleNearPi

# Below this rotation angle the Taylor expansions of the exp/log coefficient
# functions are used; well inside float64 accuracy either way.
_SMALL_ANGLE = 1e-8
_NEAR_PI_MARGIN = 1e-6

# The helpers below run hundreds of thousands of times per simulated trial,
# so they unpack to python floats and avoid vector intermediates.


def _floats(v) -> list:
    if type(v) is np.ndarray:
        return v.tolist()
    return [float(c) for c in v]


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = _floats(a)
    bw, bx, by, bz = _floats(b)
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion without building the matrix."""
    w, x, y, z = _floats(q)
    vx, vy, vz = _floats(v)
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array([vx + w * tx + (y * tz - z * ty),
                     vy + w * ty + (z * tx - x * tz),
                     vz + w * tz + (x * ty - y * tx)])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = _floats(q)
    return np.array([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ]).reshape(3, 3)


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability.
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = np.array([(m[2, 1] - m[1, 2]) / s,
                      0.25 * s,
                      (m[0, 1] + m[1, 0]) / s,
                      (m[0, 2] + m[2, 0]) / s])
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = np.array([(m[0, 2] - m[2, 0]) / s,
                      (m[0, 1] + m[1, 0]) / s,
                      0.25 * s,
                      (m[1, 2] + m[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = np.array([(m[1, 0] - m[0, 1]) / s,
                      (m[0, 2] + m[2, 0]) / s,
                      (m[1, 2] + m[2, 1]) / s,
                      0.25 * s])
    return q / np.linalg.norm(q)


@dataclass
class Pose:
    """Rigid transform: rotation as unit quaternion (w,x,y,z), w >= 0."""

    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = self.quat
        if type(q) is not np.ndarray or q.dtype != np.float64 or q.shape != (4,):
            q = np.asarray(q, dtype=float).reshape(4)
        n2 = float(q @ q)
        if n2 == 0.0:
            raise ValueError("zero quaternion")
        s = 1.0 / math.sqrt(n2)
        if q[0] < 0:
            s = -s
        self.quat = q * s
        t = self.trans
        if type(t) is not np.ndarray or t.dtype != np.float64 or t.shape != (3,):
            t = np.asarray(t, dtype=float).reshape(3)
        self.trans = t.copy()

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(matrix_to_quat(m[:3, :3]), m[:3, 3])

    @staticmethod
    def from_matrix_parts(rotation: np.ndarray, translation: np.ndarray) -> "Pose":
        return Pose(matrix_to_quat(np.asarray(rotation, dtype=float)),
                    translation)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.quat)
        m[:3, 3] = self.trans
        return m

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(quat_multiply(self.quat, other.quat),
                    quat_rotate(self.quat, other.trans) + self.trans)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        w, x, y, z = _floats(self.quat)
        qinv = np.array([w, -x, -y, -z])
        return Pose(qinv, -quat_rotate(qinv, self.trans))

    def apply(self, point: np.ndarray) -> np.ndarray:
        return quat_rotate(self.quat, np.asarray(point, dtype=float)) \
            + self.trans

    def rotation_angle(self) -> float:
        """Geodesic angle of the rotation part, in [0, pi]."""
        w, x, y, z = _floats(self.quat)
        return 2.0 * math.atan2(math.sqrt(x * x + y * y + z * z), w)

    def copy(self) -> "Pose":
        return Pose(self.quat.copy(), self.trans.copy())

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        dq = min(np.linalg.norm(self.quat - other.quat),
                 np.linalg.norm(self.quat + other.quat))
        return dq < tol and np.linalg.norm(self.trans - other.trans) < tol


@dataclass
class Twist:
    """Exponential coordinates of a rigid motion."""

    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        a = self.angular
        if type(a) is not np.ndarray or a.dtype != np.float64 or a.shape != (3,):
            a = np.asarray(a, dtype=float).reshape(3)
        self.angular = a.copy()
        b = self.linear
        if type(b) is not np.ndarray or b.dtype != np.float64 or b.shape != (3,):
            b = np.asarray(b, dtype=float).reshape(3)
        self.linear = b.copy()

    def as_vec6(self) -> np.ndarray:
        """Packed [linear, angular] layout (wrench-compatible)."""
        out = np.empty(6)
        out[:3] = self.linear
        out[3:] = self.angular
        return out

    @staticmethod
    def from_vec6(v: np.ndarray) -> "Twist":
        v = np.asarray(v, dtype=float).reshape(6)
        return Twist(angular=v[3:], linear=v[:3])


@dataclass
class Wrench:
    """Force/torque pair, end-effector frame, layout [force, torque]."""

    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        f = self.force
        if type(f) is not np.ndarray or f.dtype != np.float64 or f.shape != (3,):
            f = np.asarray(f, dtype=float).reshape(3)
        self.force = f.copy()
        t = self.torque
        if type(t) is not np.ndarray or t.dtype != np.float64 or t.shape != (3,):
            t = np.asarray(t, dtype=float).reshape(3)
        self.torque = t.copy()

    def as_vec6(self) -> np.ndarray:
        out = np.empty(6)
        out[:3] = self.force
        out[3:] = self.torque
        return out

    @staticmethod
    def from_vec6(v: np.ndarray) -> "Wrench":
        v = np.asarray(v, dtype=float).reshape(6)
        return Wrench(force=v[:3], torque=v[3:])


def exp_map(xi: Twist) -> Pose:
    """SE(3) exponential: Rodrigues rotation plus the translation Jacobian."""
    wx, wy, wz = _floats(xi.angular)
    vx, vy, vz = _floats(xi.linear)
    t2 = wx * wx + wy * wy + wz * wz
    theta = math.sqrt(t2)
    if theta < _SMALL_ANGLE:
        # V -> I + [w]x/2 + [w]x^2/6 as theta -> 0
        qw, qs = 1.0, 0.5  # first-order quaternion
        A, B = 0.5, 1.0 / 6.0
    else:
        qw = math.cos(0.5 * theta)
        qs = math.sin(0.5 * theta) / theta
        A = (1.0 - math.cos(theta)) / t2
        B = (theta - math.sin(theta)) / (t2 * theta)
    q = np.array([qw, qs * wx, qs * wy, qs * wz])
    # V @ v = v + A (w x v) + B (w x (w x v))
    cx = wy * vz - wz * vy
    cy = wz * vx - wx * vz
    cz = wx * vy - wy * vx
    dx = wy * cz - wz * cy
    dy = wz * cx - wx * cz
    dz = wx * cy - wy * cx
    return Pose(q, np.array([vx + A * cx + B * dx,
                             vy + A * cy + B * dy,
                             vz + A * cz + B * dz]))


def log_map(pose: Pose) -> Twist:
    """SE(3) logarithm. Raises AngleNearPi within 1e-6 of pi."""
    qw, qx, qy, qz = _floats(pose.quat)
    n = math.sqrt(qx * qx + qy * qy + qz * qz)
    theta = 2.0 * math.atan2(n, qw)
    if theta >= np.pi - _NEAR_PI_MARGIN:
        raise AngleNearPi(f"rotation angle {theta:.9f} too close to pi")
    if theta < _SMALL_ANGLE:
        s = 2.0  # small-angle: q ~ (1, w/2)
        coef = 1.0 / 12.0
    else:
        s = theta / n
        # V^{-1} = I - [w]x/2 + (1/theta^2 - (1+cos)/(2 theta sin)) [w]x^2
        coef = 1.0 / (theta * theta) \
            - (1.0 + math.cos(theta)) / (2.0 * theta * math.sin(theta))
    wx, wy, wz = s * qx, s * qy, s * qz
    tx, ty, tz = _floats(pose.trans)
    cx = wy * tz - wz * ty
    cy = wz * tx - wx * tz
    cz = wx * ty - wy * tx
    dx = wy * cz - wz * cy
    dy = wz * cx - wx * cz
    dz = wx * cy - wy * cx
    return Twist(angular=np.array([wx, wy, wz]),
                 linear=np.array([tx - 0.5 * cx + coef * dx,
                                  ty - 0.5 * cy + coef * dy,
                                  tz - 0.5 * cz + coef * dz]))


def spherical_to_dir(theta: float, phi: float) -> np.ndarray:
    """Unit direction from polar angle (from +z) and azimuth (from +x)."""
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def dir_to_spherical(d: np.ndarray) -> tuple[float, float]:
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    theta = float(np.arccos(np.clip(d[2], -1.0, 1.0)))
    phi = float(np.arctan2(d[1], d[0]))
    return theta, phi


def angle_between(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two vectors, radians, in [0, pi]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-length vector")
    return float(np.arccos(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0)))


def quat_geodesic_angle(qa: np.ndarray, qb: np.ndarray) -> float:
    """Rotation angle taking quaternion qa to qb."""
    dot = abs(float(np.dot(qa, qb)))
    return 2.0 * np.arccos(np.clip(dot, -1.0, 1.0))


def rotation_about_axis(axis: np.ndarray, angle: float) -> Pose:
    """Pure rotation about a unit axis through the origin."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return exp_map(Twist(angular=axis * angle, linear=np.zeros(3)))


def screw_pose(axis_point: np.ndarray, axis_dir: np.ndarray, angle: float) -> Pose:
    """Rotation by `angle` about the line through axis_point along axis_dir."""
    u = np.asarray(axis_dir, dtype=float)
    u = u / np.linalg.norm(u)
    p = np.asarray(axis_point, dtype=float)
    w = angle * u
    return exp_map(Twist(angular=w, linear=-np.cross(w, p)))
