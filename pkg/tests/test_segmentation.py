"""Segmenter unit tests.

The TVD routine is checked two independent ways: against an accelerated
projected-gradient solve of the dual box-QP, and with a KKT certificate
(dual variables recovered from the candidate solution must be feasible and
complementary, which for this convex problem proves exact optimality).
"""
import numpy as np
import pytest

from ec_lfd.demo import EVENT_GRASP, EVENT_RELEASE
from ec_lfd.errors import DegenerateDemo
from ec_lfd.segmentation import (
    SegmenterConfig,
    detect_force_edges,
    detect_gripper_events,
    refine_by_zvc,
    segment,
    tvd_denoise,
)
from tests.conftest import build_demo


def tvd_dual_fista(y, lam, iters=60000):
    """Independent oracle: FISTA on the dual of the TVD objective."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2 or lam == 0:
        return y.copy()

    def Dt(u):  # D^T u
        out = np.zeros(n)
        out[:-1] -= u
        out[1:] += u
        return out

    def D(x):
        return np.diff(x)

    u = np.zeros(n - 1)
    z = u.copy()
    t = 1.0
    L = 4.0
    for _ in range(iters):
        grad = D(Dt(z) - y)
        u_new = np.clip(z - grad / L, -lam, lam)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = u_new + ((t - 1) / t_new) * (u_new - u)
        if np.max(np.abs(u_new - u)) < 1e-14:
            u = u_new
            break
        u, t = u_new, t_new
    return y - Dt(u)


def assert_kkt_optimal(y, x, lam, tol=1e-8):
    """Recover dual variables from x; feasibility + complementarity = optimal."""
    n = len(y)
    u = np.zeros(n - 1)
    u[0] = x[0] - y[0]
    for i in range(1, n - 1):
        u[i] = u[i - 1] + x[i] - y[i]
    # stationarity of the last coordinate
    assert abs(x[-1] - y[-1] + u[-1]) < tol
    # dual feasibility
    assert np.max(np.abs(u)) <= lam + tol
    # complementary slackness at jumps
    jumps = np.diff(x)
    for i, j in enumerate(jumps):
        if abs(j) > tol:
            assert abs(u[i] - lam * np.sign(j)) < tol


def test_tvd_against_fista_oracle():
    rng = np.random.default_rng(0)
    for lam in (0.5, 5.0):
        levels = np.repeat(rng.uniform(-10, 10, 5), 24)
        y = levels + rng.normal(0, 1.0, len(levels))
        x = tvd_denoise(y, lam)
        x_oracle = tvd_dual_fista(y, lam)
        assert np.max(np.abs(x - x_oracle)) < 1e-6


def test_tvd_kkt_certificate_many_signals():
    rng = np.random.default_rng(1)
    for trial in range(40):
        n = rng.integers(2, 200)
        kind = trial % 3
        if kind == 0:
            y = rng.normal(0, 5, n)
        elif kind == 1:
            y = np.cumsum(rng.normal(0, 1, n))
        else:
            y = np.repeat(rng.uniform(0, 20, max(1, n // 10 + 1)), 10)[:n].astype(float)
            y += rng.normal(0, 0.3, n)
        lam = float(rng.uniform(0.01, 10))
        x = tvd_denoise(y, lam)
        assert_kkt_optimal(y, x, lam)


def test_tvd_lambda_zero_is_identity():
    rng = np.random.default_rng(2)
    y = rng.normal(size=50)
    assert np.array_equal(tvd_denoise(y, 0.0), y)


def test_tvd_constant_signal_unchanged():
    y = np.full(30, 7.0)
    assert np.allclose(tvd_denoise(y, 5.0), y, atol=1e-12)


def test_tvd_preserves_mean_and_shrinks_tv():
    rng = np.random.default_rng(3)
    y = np.cumsum(rng.normal(size=100))
    x = tvd_denoise(y, 2.0)
    assert np.sum(x) == pytest.approx(np.sum(y), abs=1e-8)
    assert np.sum(np.abs(np.diff(x))) <= np.sum(np.abs(np.diff(y))) + 1e-12


def test_tvd_large_lambda_flattens():
    rng = np.random.default_rng(4)
    y = rng.normal(0, 1, 60)
    x = tvd_denoise(y, 1e6)
    assert np.max(np.abs(x - y.mean())) < 1e-6


def test_force_edges_step_signal():
    cfg = SegmenterConfig()
    norms = np.concatenate([np.zeros(100), np.full(100, 15.0), np.zeros(100)])
    spans = detect_force_edges(norms, cfg)
    assert [(s.start, s.stop, s.label) for s in spans] == [
        (0, 100, "free"), (100, 200, "in_contact"), (200, 300, "free")]


def test_force_edges_low_plateau_free():
    cfg = SegmenterConfig()
    spans = detect_force_edges(np.full(50, 1.5), cfg)
    assert spans == [(0, 50, "free")]


def test_force_edges_mid_plateau_contact():
    # 8 N never crosses the 10 N edge threshold but is not free either
    cfg = SegmenterConfig()
    spans = detect_force_edges(np.full(50, 8.0), cfg)
    assert [(s.start, s.stop, s.label) for s in spans] == [(0, 50, "in_contact")]


def test_force_edges_all_zero():
    cfg = SegmenterConfig()
    spans = detect_force_edges(np.zeros(40), cfg)
    assert [(s.start, s.stop, s.label) for s in spans] == [(0, 40, "free")]


def test_gripper_single_drop():
    cfg = SegmenterConfig()
    g = np.concatenate([np.ones(50), np.full(50, 0.1)])
    events = detect_gripper_events(g, cfg)
    assert events == [(50, EVENT_GRASP)]


def test_gripper_chatter_single_event():
    cfg = SegmenterConfig()
    g = np.concatenate([np.ones(10), np.tile([0.49, 0.51], 20)])
    events = detect_gripper_events(g, cfg)
    assert len(events) == 1
    assert events[0].event == EVENT_GRASP


def test_gripper_constant_none():
    cfg = SegmenterConfig()
    assert detect_gripper_events(np.ones(30), cfg) == []


def test_gripper_full_cycle():
    cfg = SegmenterConfig()
    g = np.concatenate([np.ones(20), np.zeros(20), np.ones(20)])
    events = detect_gripper_events(g, cfg)
    assert [e.event for e in events] == [EVENT_GRASP, EVENT_RELEASE]
    assert events[0].index == 20 and events[1].index == 40


def test_zvc_splits_at_dwell():
    cfg = SegmenterConfig()
    dt = 0.01
    leg1 = np.outer(np.linspace(0, 0.1, 80), [1.0, 0, 0])
    dwell = np.tile(leg1[-1], (30, 1))
    leg2 = leg1[-1] + np.outer(np.linspace(0, 0.1, 80), [0, 1.0, 0])
    pos = np.vstack([leg1, dwell, leg2])
    times = np.arange(len(pos)) * dt
    bounds = refine_by_zvc(pos, times, cfg, (0, len(pos)))
    assert len(bounds) == 1
    assert 80 <= bounds[0] <= 110


def test_zvc_no_dwell_no_split():
    cfg = SegmenterConfig()
    pos = np.outer(np.linspace(0, 0.2, 150), [1.0, 0, 0])
    times = np.arange(150) * 0.01
    assert refine_by_zvc(pos, times, cfg, (0, 150)) == []


def composite_demo():
    """free slide -> press/slide with a mid dwell -> free retreat"""
    dt = 0.01
    segs = []
    f = []
    # free approach, 1 s, 10 cm
    segs.append(np.outer(np.linspace(0, 0.10, 100), [1.0, 0, 0]))
    f.append(np.zeros((100, 3)))
    # contact slide 6 cm, dwell, slide 6 cm in y
    c0 = segs[-1][-1]
    a = c0 + np.outer(np.linspace(0, 0.06, 90), [1.0, 0, 0])
    b = np.tile(a[-1], (30, 1))
    c = a[-1] + np.outer(np.linspace(0, 0.06, 90), [0, 1.0, 0])
    contact = np.vstack([a, b, c])
    segs.append(contact)
    f.append(np.tile([0.0, 0.0, 15.0], (len(contact), 1)))
    # free retreat 8 cm
    segs.append(contact[-1] + np.outer(np.linspace(0, 0.08, 80), [0, 0, 1.0]))
    f.append(np.zeros((80, 3)))
    pos = np.vstack(segs)
    forces = np.vstack(f)
    rng = np.random.default_rng(5)
    forces = forces + rng.normal(0, 0.2, forces.shape)
    times = np.arange(len(pos)) * dt
    return build_demo(times, pos, forces=forces)


def test_segment_composite():
    demo = composite_demo()
    phases = segment(demo)
    labels = [p.contact_label for p in phases]
    assert labels == ["free", "in_contact", "in_contact", "free"]
    # boundaries near 100, ~145 area (dwell), 310
    assert abs(phases[0].stop - 100) <= 10
    assert abs(phases[2].stop - 310) <= 10
    # full partition
    assert phases[0].start == 0 and phases[-1].stop == len(demo)
    for a, b in zip(phases[:-1], phases[1:]):
        assert a.stop == b.start


def test_segment_prunes_tiny_spans():
    # gripper blip mid-flight creates a boundary; the 1 cm tail span is merged
    dt = 0.01
    pos = np.outer(np.linspace(0, 0.10, 200), [1.0, 0, 0])
    g = np.ones(200)
    g[190:] = 0.0  # grasp near the end; final span moves < 2 cm
    times = np.arange(200) * dt
    demo = build_demo(times, pos, grippers=g)
    phases = segment(demo)
    assert len(phases) == 1
    assert phases[0].start == 0 and phases[0].stop == 200


def test_segment_degenerate_static():
    demo = build_demo(np.arange(50) * 0.01, np.zeros((50, 3)))
    with pytest.raises(DegenerateDemo):
        segment(demo)


def test_segment_degenerate_short():
    demo = build_demo(np.arange(5) * 0.01, np.zeros((5, 3)))
    with pytest.raises(DegenerateDemo):
        segment(demo)
