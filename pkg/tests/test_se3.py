"""Pose/twist algebra against a dense matrix-exponential oracle."""
import numpy as np
import pytest
import scipy.linalg

from ec_lfd.se3 import (
    Pose,
    Twist,
    Wrench,
    exp_map,
    log_map,
    spherical_to_dir,
    dir_to_spherical,
    angle_between,
    rotation_about_axis,
    screw_pose,
    quat_geodesic_angle,
)
from ec_lfd.errors import AngleNearPi


def twist_hat(xi: Twist) -> np.ndarray:
    w = xi.angular
    m = np.zeros((4, 4))
    m[:3, :3] = np.array([
        [0, -w[2], w[1]],
        [w[2], 0, -w[0]],
        [-w[1], w[0], 0],
    ])
    m[:3, 3] = xi.linear
    return m


def oracle_exp(xi: Twist) -> np.ndarray:
    # independent route: dense 4x4 exponential (scaling and squaring)
    return scipy.linalg.expm(twist_hat(xi))


def random_twist(rng, max_angle=3.0, max_lin=2.0) -> Twist:
    w = rng.normal(size=3)
    n = np.linalg.norm(w)
    if n > 0:
        w = w / n * rng.uniform(0, max_angle)
    return Twist(angular=w, linear=rng.uniform(-max_lin, max_lin, size=3))


def test_exp_matches_dense_matrix_exponential():
    rng = np.random.default_rng(0)
    for _ in range(300):
        xi = random_twist(rng)
        got = exp_map(xi).matrix()
        want = oracle_exp(xi)
        assert np.allclose(got, want, atol=1e-10)


def test_exp_small_angles_match_oracle():
    rng = np.random.default_rng(1)
    for scale in [1e-3, 1e-6, 1e-9, 1e-12, 0.0]:
        w = rng.normal(size=3)
        w = w / np.linalg.norm(w) * scale
        xi = Twist(angular=w, linear=rng.normal(size=3))
        assert np.allclose(exp_map(xi).matrix(), oracle_exp(xi), atol=1e-10)


def test_log_exp_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(500):
        xi = random_twist(rng, max_angle=np.pi - 1e-3)
        back = log_map(exp_map(xi))
        assert np.allclose(back.angular, xi.angular, atol=1e-9)
        assert np.allclose(back.linear, xi.linear, atol=1e-9)


def test_exp_log_round_trip_on_poses():
    rng = np.random.default_rng(3)
    for _ in range(500):
        pose = exp_map(random_twist(rng, max_angle=np.pi - 1e-3))
        again = exp_map(log_map(pose))
        assert pose.almost_equal(again, tol=1e-9)


def test_log_raises_near_pi():
    axis = np.array([0.0, 0.0, 1.0])
    with pytest.raises(AngleNearPi):
        log_map(rotation_about_axis(axis, np.pi))
    with pytest.raises(AngleNearPi):
        log_map(rotation_about_axis(axis, np.pi - 1e-7))
    # just outside the guard band is fine
    log_map(rotation_about_axis(axis, np.pi - 1e-5))


def test_identity_maps():
    p = exp_map(Twist())
    assert p.almost_equal(Pose.identity())
    xi = log_map(Pose.identity())
    assert np.allclose(xi.as_vec6(), 0)


def test_compose_inverse():
    rng = np.random.default_rng(4)
    for _ in range(100):
        a = exp_map(random_twist(rng, max_angle=3.0))
        b = exp_map(random_twist(rng, max_angle=3.0))
        ab = a @ b
        assert np.allclose(ab.matrix(), a.matrix() @ b.matrix(), atol=1e-12)
        ident = a @ a.inverse()
        assert ident.almost_equal(Pose.identity(), tol=1e-12)


def test_quaternion_canonical_w_nonnegative():
    rng = np.random.default_rng(5)
    for _ in range(200):
        q = rng.normal(size=4)
        p = Pose(q, np.zeros(3))
        assert p.quat[0] >= 0
        assert abs(np.linalg.norm(p.quat) - 1.0) < 1e-12


def test_apply_point():
    p = Pose(np.array([np.cos(np.pi / 4), 0, 0, np.sin(np.pi / 4)]),
             np.array([1.0, 0.0, 0.0]))  # 90 deg about z plus shift
    pt = p.apply(np.array([1.0, 0.0, 0.0]))
    assert np.allclose(pt, [1.0, 1.0, 0.0], atol=1e-12)


def test_spherical_to_dir_conventions():
    # polar angle from +z, azimuth from +x
    assert np.allclose(spherical_to_dir(0.0, 0.0), [0, 0, 1], atol=1e-15)
    assert np.allclose(spherical_to_dir(np.pi / 2, 0.0), [1, 0, 0], atol=1e-15)
    assert np.allclose(spherical_to_dir(np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)


def test_spherical_round_trip():
    rng = np.random.default_rng(6)
    for _ in range(200):
        d = rng.normal(size=3)
        d = d / np.linalg.norm(d)
        theta, phi = dir_to_spherical(d)
        assert np.allclose(spherical_to_dir(theta, phi), d, atol=1e-12)
        assert abs(np.linalg.norm(spherical_to_dir(theta, phi)) - 1.0) < 1e-12


def test_angle_between():
    assert angle_between([1, 0, 0], [0, 1, 0]) == pytest.approx(np.pi / 2)
    assert angle_between([1, 0, 0], [1, 0, 0]) == pytest.approx(0.0)
    assert angle_between([1, 0, 0], [-2, 0, 0]) == pytest.approx(np.pi)
    with pytest.raises(ValueError):
        angle_between([0, 0, 0], [1, 0, 0])


def test_screw_pose_fixes_axis_points():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = rng.uniform(-1, 1, size=3)
        u = rng.normal(size=3)
        u = u / np.linalg.norm(u)
        ang = rng.uniform(-2.5, 2.5)
        T = screw_pose(p, u, ang)
        # every point on the axis is fixed
        for s in (-0.5, 0.0, 0.7):
            x = p + s * u
            assert np.allclose(T.apply(x), x, atol=1e-10)
        # off-axis points rotate by the commanded angle
        x = p + np.array([1.0, 0.0, 0.0]) - u * np.dot([1.0, 0, 0], u)
        y = T.apply(x)
        assert np.linalg.norm(y - p) == pytest.approx(np.linalg.norm(x - p), abs=1e-9)


def test_quat_geodesic_angle():
    a = rotation_about_axis([0, 0, 1], 0.3)
    b = rotation_about_axis([0, 0, 1], 1.1)
    assert quat_geodesic_angle(a.quat, b.quat) == pytest.approx(0.8, abs=1e-9)


def test_vec6_layout_linear_first():
    xi = Twist(angular=[4, 5, 6], linear=[1, 2, 3])
    assert np.allclose(xi.as_vec6(), [1, 2, 3, 4, 5, 6])
    back = Twist.from_vec6([1, 2, 3, 4, 5, 6])
    assert np.allclose(back.linear, [1, 2, 3])
    assert np.allclose(back.angular, [4, 5, 6])
    w = Wrench(force=[1, 2, 3], torque=[4, 5, 6])
    assert np.allclose(w.as_vec6(), [1, 2, 3, 4, 5, 6])
