"""Constraint-model fitting for in-contact motion phases.

Fits a 1-DOF line, a plane, or a revolute (circular) model to the positions
of a phase, and classifies a phase's candidate constraint set from how much
the end-effector orientation changed over the phase.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateGeometry
from .se3 import dir_to_spherical, spherical_to_dir, quat_geodesic_angle

# Orientation change separating rotation-candidates from translation-candidates.
ROTATION_SPAN_THRESHOLD_RAD = np.deg2rad(30.0)
# Minimum arc needed before a circle fit is attempted.
MIN_REVOLUTE_SPAN_RAD = np.deg2rad(5.0)

GN_MAX_ITERS = 50
GN_STEP_TOL = 1e-12


@dataclass
class ConstraintModel:
    """Fitted environmental-constraint geometry.

    kind "translation": axis = admissible motion direction, point on the line.
    kind "plane":       axis = outward surface normal, point on the plane.
    kind "rotation":    axis = joint direction, point = circle center,
                        radius = circle radius.
    """

    kind: str
    axis: np.ndarray
    point: np.ndarray
    residual: float
    radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("translation", "plane", "rotation"):
            raise ValueError(f"bad model kind {self.kind!r}")
        self.axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(self.axis)
        if n == 0:
            raise ValueError("zero axis")
        self.axis = self.axis / n
        self.point = np.asarray(self.point, dtype=float).reshape(3)

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "axis": self.axis.tolist(),
            "point": self.point.tolist(),
            "residual": float(self.residual),
        }
        if self.radius is not None:
            out["radius"] = float(self.radius)
        return out

    def transformed(self, pose) -> "ConstraintModel":
        """The same constraint expressed through a rigid transform."""
        return ConstraintModel(
            kind=self.kind,
            axis=pose.rotation() @ self.axis,
            point=pose.apply(self.point),
            residual=self.residual,
            radius=self.radius,
        )

    @staticmethod
    def from_json(obj: dict) -> "ConstraintModel":
        return ConstraintModel(
            kind=obj["kind"],
            axis=np.array(obj["axis"], dtype=float),
            point=np.array(obj["point"], dtype=float),
            residual=float(obj["residual"]),
            radius=obj.get("radius"),
        )


@dataclass
class PhaseClassification:
    candidates: tuple
    angular_span: float  # radians


def fit_line(positions: np.ndarray) -> ConstraintModel:
    """Principal direction of a point run, sign-aligned with net displacement."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(pts) < 2:
        raise DegenerateGeometry("need at least 2 positions for a line fit")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    if np.max(np.linalg.norm(centered, axis=1)) < 1e-12:
        raise DegenerateGeometry("all positions coincide")
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    net = pts[-1] - pts[0]
    if np.dot(axis, net) < 0:
        axis = -axis
    resid = float(np.sqrt(np.mean(
        np.linalg.norm(centered - np.outer(centered @ axis, axis), axis=1) ** 2)))
    return ConstraintModel("translation", axis, centroid, resid)


def fit_plane(positions: np.ndarray,
              contact_force: Optional[np.ndarray] = None) -> ConstraintModel:
    """Least-squares plane.

    The normal opposes `contact_force` when given (the force the end-effector
    applies through the contact, so the normal points away from the surface
    material); otherwise it is chosen in the +z hemisphere.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegenerateGeometry("need at least 3 positions for a plane fit")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    # collinear runs leave the normal direction unconstrained
    if s[1] < max(1e-10, 1e-9 * s[0]):
        raise DegenerateGeometry("positions are collinear; plane normal undetermined")
    normal = vt[2]
    if contact_force is not None and np.linalg.norm(contact_force) > 0:
        if np.dot(normal, contact_force) > 0:
            normal = -normal
    else:
        if normal[2] < 0 or (normal[2] == 0 and (normal[0] < 0 or (normal[0] == 0 and normal[1] < 0))):
            normal = -normal
    resid = float(np.sqrt(np.mean((centered @ normal) ** 2)))
    return ConstraintModel("plane", normal, centroid, resid)


def _kasa_circle_2d(xy: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic circle fit: returns (center_2d, radius)."""
    x, y = xy[:, 0], xy[:, 1]
    A = np.column_stack([2 * x, 2 * y, np.ones(len(x))])
    b = x * x + y * y
    sol, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    if rank < 3 or sv[-1] < 1e-12 * max(sv[0], 1.0):
        raise DegenerateGeometry("projected positions are collinear; no circle")
    cx, cy, c = sol
    r2 = c + cx * cx + cy * cy
    if r2 <= 0:
        raise DegenerateGeometry("circle fit produced non-positive radius")
    return np.array([cx, cy]), float(np.sqrt(r2))


def _circle_residuals(params: np.ndarray, pts: np.ndarray) -> np.ndarray:
    theta, phi, cx, cy, cz, r = params
    u = spherical_to_dir(theta, phi)
    d = pts - np.array([cx, cy, cz])
    h = d @ u                                  # axial offsets
    radial = d - np.outer(h, u)
    rho = np.linalg.norm(radial, axis=1)
    return np.concatenate([rho - r, h])


def fit_revolute(positions: np.ndarray, quats: np.ndarray) -> ConstraintModel:
    """Two-stage circle fit: plane + algebraic circle, then Gauss-Newton.

    `quats` are the phase orientations, used for the angular-span
    precondition; positions drive the geometric fit.
    """
    pts = np.asarray(positions, dtype=float).reshape(-1, 3)
    quats = np.asarray(quats, dtype=float).reshape(-1, 4)
    if len(pts) < 3:
        raise DegenerateGeometry("need at least 3 poses for a revolute fit")
    span = quat_geodesic_angle(quats[0], quats[-1])
    if span <= MIN_REVOLUTE_SPAN_RAD:
        raise DegenerateGeometry(
            f"angular span {np.rad2deg(span):.2f} deg too small for a revolute fit")

    plane = fit_plane(pts)
    u = plane.axis
    # in-plane basis
    e1 = np.cross(u, [1.0, 0.0, 0.0])
    if np.linalg.norm(e1) < 1e-6:
        e1 = np.cross(u, [0.0, 1.0, 0.0])
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    rel = pts - plane.point
    xy = np.column_stack([rel @ e1, rel @ e2])
    c2d, r0 = _kasa_circle_2d(xy)
    center0 = plane.point + c2d[0] * e1 + c2d[1] * e2

    theta0, phi0 = dir_to_spherical(u)
    params = np.array([theta0, phi0, *center0, r0])
    for _ in range(GN_MAX_ITERS):
        res = _circle_residuals(params, pts)
        # central-difference Jacobian; exact enough since GN steps vanish
        # with the residual on clean data
        J = np.empty((len(res), 6))
        for j in range(6):
            eps = 1e-7 * max(1.0, abs(params[j]))
            pp = params.copy(); pp[j] += eps
            pm = params.copy(); pm[j] -= eps
            J[:, j] = (_circle_residuals(pp, pts) - _circle_residuals(pm, pts)) / (2 * eps)
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        params = params + step
        if np.linalg.norm(step) < GN_STEP_TOL:
            break

    theta, phi, cx, cy, cz, r = params
    axis = spherical_to_dir(theta, phi)
    center = np.array([cx, cy, cz])
    if r <= 0:
        raise DegenerateGeometry("refined circle radius non-positive")
    # sign: trajectory progresses with positive angle about the axis
    rel = pts - center
    sense = 0.0
    for a, b in zip(rel[:-1], rel[1:]):
        sense += np.dot(axis, np.cross(a, b))
    if sense < 0:
        axis = -axis
    res = _circle_residuals(np.array([*dir_to_spherical(axis), cx, cy, cz, r]), pts)
    n = len(pts)
    rms = float(np.sqrt(np.mean(res[:n] ** 2 + res[n:] ** 2)))
    return ConstraintModel("rotation", axis, center, rms, radius=float(r))


def angular_span(quats: np.ndarray) -> float:
    """Geodesic angle between the first and last orientation, radians."""
    quats = np.asarray(quats, dtype=float).reshape(-1, 4)
    if len(quats) < 2:
        return 0.0
    return quat_geodesic_angle(quats[0], quats[-1])


def classify_phase(quats: np.ndarray,
                   threshold_rad: float = ROTATION_SPAN_THRESHOLD_RAD) -> PhaseClassification:
    """Candidate constraint kinds from the phase's orientation change."""
    span = angular_span(quats)
    if span >= threshold_rad - 1e-12:
        return PhaseClassification(("rotation", "plane"), span)
    return PhaseClassification(("translation", "plane"), span)
