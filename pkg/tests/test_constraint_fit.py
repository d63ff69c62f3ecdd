"""Geometric model fits: noiseless exactness, signs, degeneracy guards."""
import numpy as np
import pytest

from ec_lfd.constraint_fit import (
    ConstraintModel,
    angular_span,
    classify_phase,
    fit_line,
    fit_plane,
    fit_revolute,
)
from ec_lfd.errors import DegenerateGeometry
from ec_lfd.se3 import rotation_about_axis, screw_pose, Pose


def circle_poses(axis_point, axis_dir, radius, angles, rng=None):
    """Rigid poses riding a circle (orientation rotates with the arm)."""
    axis_dir = np.asarray(axis_dir, dtype=float)
    axis_dir = axis_dir / np.linalg.norm(axis_dir)
    # a radial start vector perpendicular to the axis
    seed = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(seed, axis_dir)) > 0.9:
        seed = np.array([0.0, 1.0, 0.0])
    radial = seed - np.dot(seed, axis_dir) * axis_dir
    radial = radial / np.linalg.norm(radial) * radius
    start = Pose(np.array([1.0, 0, 0, 0]), np.asarray(axis_point) + radial)
    poses = []
    for a in angles:
        T = screw_pose(axis_point, axis_dir, a)
        poses.append(T @ start)
    return poses


def test_fit_line_two_points():
    m = fit_line(np.array([[0.0, 0, 0], [0, 0, 2.0]]))
    assert np.allclose(m.axis, [0, 0, 1], atol=1e-12)
    assert m.residual == pytest.approx(0.0, abs=1e-12)


def test_fit_line_sign_follows_net_displacement():
    pts = np.linspace([0, 0, 0], [-1.0, 0, 0], 20)
    m = fit_line(pts)
    assert np.allclose(m.axis, [-1, 0, 0], atol=1e-12)


def test_fit_line_noiseless_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = rng.normal(size=3)
        d = d / np.linalg.norm(d)
        p0 = rng.uniform(-1, 1, 3)
        pts = p0 + np.outer(np.linspace(0, 0.3, 40), d)
        m = fit_line(pts)
        assert np.linalg.norm(np.cross(m.axis, d)) < 1e-9
        assert np.dot(m.axis, d) > 0
        assert m.residual < 1e-9


def test_fit_line_degenerate():
    with pytest.raises(DegenerateGeometry):
        fit_line(np.zeros((5, 3)))
    with pytest.raises(DegenerateGeometry):
        fit_line(np.array([[1.0, 2.0, 3.0]]))


def test_fit_plane_noiseless():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = rng.normal(size=3)
        n = n / np.linalg.norm(n)
        e1 = np.cross(n, [1, 0, 0])
        if np.linalg.norm(e1) < 1e-3:
            e1 = np.cross(n, [0, 1, 0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        uv = rng.uniform(-0.2, 0.2, size=(30, 2))
        p0 = rng.uniform(-1, 1, 3)
        pts = p0 + np.outer(uv[:, 0], e1) + np.outer(uv[:, 1], e2)
        m = fit_plane(pts)
        assert min(np.linalg.norm(m.axis - n), np.linalg.norm(m.axis + n)) < 1e-9
        assert m.residual < 1e-9


def grid_on_z0():
    xs, ys = np.meshgrid(np.linspace(0, 0.1, 5), np.linspace(0, 0.05, 4))
    return np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])


def test_fit_plane_sign_opposes_contact_force():
    pts = grid_on_z0()
    # end-effector presses downward through the contact
    m = fit_plane(pts, contact_force=np.array([0, 0, -3.0]))
    assert np.allclose(m.axis, [0, 0, 1], atol=1e-12)
    m2 = fit_plane(pts, contact_force=np.array([0, 0, 3.0]))
    assert np.allclose(m2.axis, [0, 0, -1], atol=1e-12)


def test_fit_plane_default_hemisphere():
    m = fit_plane(grid_on_z0())
    assert m.axis[2] > 0


def test_fit_plane_collinear_degenerate():
    pts = np.outer(np.linspace(0, 1, 10), [1.0, 0, 0])
    with pytest.raises(DegenerateGeometry):
        fit_plane(pts)


def test_fit_revolute_reference_circle():
    # circle of radius 0.1 about the z-axis through the origin, 90 degree arc
    angles = np.linspace(0, np.pi / 2, 30)
    poses = circle_poses([0, 0, 0], [0, 0, 1], 0.1, angles)
    m = fit_revolute(np.array([p.trans for p in poses]),
                     np.array([p.quat for p in poses]))
    assert np.allclose(m.axis, [0, 0, 1], atol=1e-9)
    assert np.linalg.norm(np.cross(m.point - 0, m.axis)) < 1e-9  # center on the axis
    assert m.radius == pytest.approx(0.1, abs=1e-9)
    assert m.residual < 1e-9


def test_fit_revolute_random_axes():
    rng = np.random.default_rng(2)
    for _ in range(25):
        u = rng.normal(size=3)
        u = u / np.linalg.norm(u)
        c = rng.uniform(-0.5, 0.5, 3)
        r = rng.uniform(0.05, 0.3)
        arc = rng.uniform(np.deg2rad(25), np.deg2rad(180))
        poses = circle_poses(c, u, r, np.linspace(0, arc, 40))
        m = fit_revolute(np.array([p.trans for p in poses]),
                         np.array([p.quat for p in poses]))
        assert np.dot(m.axis, u) > 0  # sign follows the rotation sense
        assert np.linalg.norm(np.cross(m.axis, u)) < 1e-7
        # center should land on the true axis line
        d = m.point - c
        assert np.linalg.norm(d - np.dot(d, u) * u) < 1e-7
        assert m.radius == pytest.approx(r, abs=1e-7)


def test_fit_revolute_sign_flips_with_sense():
    angles = np.linspace(0, np.pi / 2, 30)
    poses = circle_poses([0, 0, 0], [0, 0, 1], 0.1, -angles)  # clockwise
    m = fit_revolute(np.array([p.trans for p in poses]),
                     np.array([p.quat for p in poses]))
    assert np.allclose(m.axis, [0, 0, -1], atol=1e-9)


def test_fit_revolute_degenerate_straight_line():
    pts = np.outer(np.linspace(0, 0.2, 20), [1.0, 0, 0])
    quats = np.tile([1.0, 0, 0, 0], (20, 1))
    with pytest.raises(DegenerateGeometry):
        fit_revolute(pts, quats)


def test_fit_revolute_small_span_degenerate():
    angles = np.linspace(0, np.deg2rad(4.0), 10)
    poses = circle_poses([0, 0, 0], [0, 0, 1], 0.1, angles)
    with pytest.raises(DegenerateGeometry):
        fit_revolute(np.array([p.trans for p in poses]),
                     np.array([p.quat for p in poses]))


def test_angular_span_and_classify():
    qs = [rotation_about_axis([0, 0, 1], a).quat
          for a in np.linspace(0, np.deg2rad(45), 20)]
    cls = classify_phase(np.array(qs))
    assert cls.candidates == ("rotation", "plane")
    assert cls.angular_span == pytest.approx(np.deg2rad(45), abs=1e-9)

    qs = [rotation_about_axis([0, 0, 1], a).quat
          for a in np.linspace(0, np.deg2rad(10), 20)]
    cls = classify_phase(np.array(qs))
    assert cls.candidates == ("translation", "plane")


def test_classify_exact_threshold_is_rotation():
    qs = [rotation_about_axis([1, 0, 0], a).quat
          for a in np.linspace(0, np.deg2rad(30), 10)]
    cls = classify_phase(np.array(qs))
    assert cls.candidates == ("rotation", "plane")


def test_model_json_round_trip():
    m = ConstraintModel("rotation", np.array([0, 0, 1.0]),
                        np.array([0.1, 0.2, 0.3]), 1e-4, radius=0.08)
    back = ConstraintModel.from_json(m.to_json())
    assert back.kind == "rotation"
    assert np.allclose(back.axis, m.axis)
    assert np.allclose(back.point, m.point)
    assert back.radius == pytest.approx(0.08)
