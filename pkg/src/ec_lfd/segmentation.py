"""Demonstration segmentation into motion phases.

Pipeline: denoise the force-magnitude signal with exact 1-D total-variation
denoising, cut at force edges, split further at gripper events and at
zero-velocity crossings inside in-contact spans, coalesce nearby boundaries,
then drop spans where the end-effector barely moved.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .demo import (
    Demonstration,
    MotionPhase,
    EVENT_GRASP,
    EVENT_RELEASE,
)
from .errors import DegenerateDemo


@dataclass
class SegmenterConfig:
    tvd_lambda: float = 5.0
    force_edge_threshold: float = 10.0   # N
    free_mean_force: float = 2.0         # N
    min_displacement: float = 0.02       # m
    zvc_min_speed: float = 0.005         # m/s
    zvc_window: int = 5                  # samples
    coalesce_samples: int = 10
    gripper_threshold: float = 0.5
    gripper_hysteresis: float = 0.05


class ForceSpan(NamedTuple):
    start: int
    stop: int
    label: str  # "free" | "in_contact"


class GripperEvent(NamedTuple):
    index: int
    event: str  # EVENT_GRASP | EVENT_RELEASE


def tvd_denoise(y: np.ndarray, lam: float) -> np.ndarray:
    """Exact minimizer of 0.5*sum((y_i-x_i)^2) + lam*sum(|x_{i+1}-x_i|).

    Dynamic program over the derivative of the value function: each step
    clips the piecewise-linear derivative at -lam/+lam, records the clip
    points, and adds the next quadratic data term; a backward pass clamps
    through the recorded intervals. Exact and O(n).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("tvd_denoise expects a 1-D signal")
    n = len(y)
    if n == 0:
        return y.copy()
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if n == 1 or lam == 0:
        return y.copy()

    ys = y.tolist()
    cap = 2 * n + 2
    pos = [0.0] * cap   # knot positions of the derivative
    dslp = [0.0] * cap  # slope jump when crossing the knot left-to-right
    dint = [0.0] * cap  # intercept jump
    lo, hi = n + 1, n   # empty deque
    # derivative of f_0: d(z) = z - y0 everywhere
    a_left, b_left = 1.0, -ys[0]
    a_right, b_right = 1.0, -ys[0]
    tm = [0.0] * n
    tp = [0.0] * n

    for i in range(1, n):
        yi = ys[i]
        # left walk: find where the derivative reaches -lam
        a, b = a_left, b_left
        while lo <= hi and a * pos[lo] + b < -lam:
            a += dslp[lo]
            b += dint[lo]
            lo += 1
        bminus = (-lam - b) / a
        a_in, b_in = a, b
        # right walk: find where the derivative reaches +lam
        a2, b2 = a_right, b_right
        while hi >= lo and a2 * pos[hi] + b2 > lam:
            a2 -= dslp[hi]
            b2 -= dint[hi]
            hi -= 1
        bplus = (lam - b2) / a2
        a_out, b_out = a2, b2
        tm[i] = bminus
        tp[i] = bplus
        # rebuild: clipped derivative plus the new data term (z - yi)
        lo -= 1
        pos[lo] = bminus
        dslp[lo] = a_in
        dint[lo] = b_in + lam
        hi += 1
        pos[hi] = bplus
        dslp[hi] = -a_out
        dint[hi] = lam - b_out
        a_left, b_left = 1.0, -lam - yi
        a_right, b_right = 1.0, lam - yi

    # minimize the final value function: walk to the zero of its derivative
    a, b = a_left, b_left
    while lo <= hi and a * pos[lo] + b < 0.0:
        a += dslp[lo]
        b += dint[lo]
        lo += 1
    x = np.empty(n)
    x[n - 1] = -b / a
    for i in range(n - 1, 0, -1):
        x[i - 1] = min(max(x[i], tm[i]), tp[i])
    return x


def detect_force_edges(norms: np.ndarray, cfg: SegmenterConfig) -> list[ForceSpan]:
    """Spans between threshold crossings, labeled by mean force."""
    norms = np.asarray(norms, dtype=float)
    n = len(norms)
    above = norms >= cfg.force_edge_threshold
    edges = [0]
    edges.extend(i for i in range(1, n) if above[i] != above[i - 1])
    edges.append(n)
    spans = []
    for s, e in zip(edges[:-1], edges[1:]):
        label = "free" if norms[s:e].mean() < cfg.free_mean_force else "in_contact"
        spans.append(ForceSpan(s, e, label))
    return spans


def detect_gripper_events(g: np.ndarray, cfg: SegmenterConfig) -> list[GripperEvent]:
    """Center-crossing detector with a re-arm hysteresis band.

    The first toggle fires at the 0.5 crossing; a reversal then needs the
    signal to clear the +-hysteresis band on the far side, so chatter around
    the threshold yields a single event.
    """
    g = np.asarray(g, dtype=float)
    th = cfg.gripper_threshold
    hys = cfg.gripper_hysteresis
    state_closed = g[0] < th
    events: list[GripperEvent] = []
    for i in range(1, len(g)):
        if not state_closed:
            trigger = th - hys if events else th
            if g[i] < trigger:
                events.append(GripperEvent(i, EVENT_GRASP))
                state_closed = True
        else:
            trigger = th + hys if events else th
            if g[i] > trigger:
                events.append(GripperEvent(i, EVENT_RELEASE))
                state_closed = False
    return events


def path_speed(positions: np.ndarray, times: np.ndarray, window: int) -> np.ndarray:
    """Translational speed, moving-averaged over `window` samples."""
    positions = np.asarray(positions, dtype=float)
    times = np.asarray(times, dtype=float)
    dt = np.diff(times)
    step = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    v = np.concatenate([[0.0], step / dt])
    if window > 1 and len(v) >= window:
        kernel = np.ones(window) / window
        v = np.convolve(v, kernel, mode="same")
    return v


def refine_by_zvc(positions: np.ndarray, times: np.ndarray,
                  cfg: SegmenterConfig, span: tuple[int, int]) -> list[int]:
    """Boundary indices at interior zero-velocity dwells inside `span`."""
    s, e = span
    if e - s < 3 * cfg.zvc_window:
        return []
    v = path_speed(positions[s:e], times[s:e], cfg.zvc_window)
    below = v < cfg.zvc_min_speed
    bounds = []
    i = 0
    n = len(v)
    while i < n:
        if below[i]:
            j = i
            while j < n and below[j]:
                j += 1
            # only interior dwells split; edge-touching lulls are ramp-in/out
            if i > 0 and j < n:
                k = i + int(np.argmin(v[i:j]))
                bounds.append(s + k)
            i = j
        else:
            i += 1
    return bounds


def _coalesce(boundaries: list[int], min_gap: int, n: int) -> list[int]:
    """Merge clusters of nearby boundaries to their rounded mean."""
    if not boundaries:
        return []
    bs = sorted(boundaries)
    clusters = [[bs[0]]]
    for b in bs[1:]:
        if b - clusters[-1][-1] <= min_gap:
            clusters[-1].append(b)
        else:
            clusters.append([b])
    out = []
    for c in clusters:
        m = int(round(float(np.mean(c))))
        if 2 <= m <= n - 2:
            out.append(m)
    return out


def segment(demo: Demonstration, cfg: SegmenterConfig | None = None) -> list[MotionPhase]:
    """Split a demonstration into labeled motion phases."""
    cfg = cfg or SegmenterConfig()
    n = len(demo)
    if n < 10:
        raise DegenerateDemo(f"only {n} waypoints")
    positions = demo.positions()
    times = demo.times()
    total_travel = np.linalg.norm(np.diff(positions, axis=0), axis=1).sum()
    norms = demo.force_norms()
    denoised = tvd_denoise(norms, cfg.tvd_lambda)
    spans = detect_force_edges(denoised, cfg)
    grip = detect_gripper_events(demo.grippers(), cfg)
    if total_travel < cfg.min_displacement and not grip:
        raise DegenerateDemo("demonstration never moves")

    boundaries = []
    for sp in spans[:-1]:
        boundaries.append(sp.stop)
    boundaries.extend(ev.index for ev in grip)
    for sp in spans:
        if sp.label == "in_contact":
            boundaries.extend(refine_by_zvc(positions, times, cfg, (sp.start, sp.stop)))
    boundaries = _coalesce(boundaries, cfg.coalesce_samples, n)

    cuts = [0] + boundaries + [n]
    phases = []
    for s, e in zip(cuts[:-1], cuts[1:]):
        mid = (s + e) // 2
        label = "free"
        for sp in spans:
            if sp.start <= mid < sp.stop:
                label = sp.label
                break
        phases.append(MotionPhase(s, e, label))

    # drop spans that barely move, folding them into the preceding phase
    def displacement(ph: MotionPhase) -> float:
        return float(np.linalg.norm(positions[ph.stop - 1] - positions[ph.start]))

    changed = True
    while changed and len(phases) > 1:
        changed = False
        for i, ph in enumerate(phases):
            if displacement(ph) < cfg.min_displacement:
                if i > 0:
                    phases[i - 1] = MotionPhase(phases[i - 1].start, ph.stop,
                                                phases[i - 1].contact_label)
                else:
                    phases[1] = MotionPhase(ph.start, phases[1].stop,
                                            phases[1].contact_label)
                del phases[i]
                changed = True
                break

    return phases
