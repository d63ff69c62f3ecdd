"""Command-line surface for the constraint-learning pipeline.

Subcommands mirror the pipeline stages: ``scenario`` exports a synthetic
demonstration fixture, ``segment`` splits a recording into motion phases,
``augment`` labels phases by replaying them against the scenario world,
``build`` turns labeled phases into an executable policy, ``run`` evaluates
a policy over seeded trials and writes a JSON report plus per-trial force
traces, and ``correct`` folds a recovery demonstration into an existing
policy.

Exit codes: 0 success, 1 for files that cannot be decoded, 2 for decoded
input that violates a precondition.  Output is deterministic for a fixed
seed: report keys are sorted, nothing records a timestamp, and every report
embeds a hash of the effective configuration.  ``EC_LFD_CONFIG`` names a
JSON config file used when ``--config`` is absent; recognized keys are
``tvd_lambda``, ``f_max``, ``v_max``, and ``record_every``.

All randomness in ``run`` flows from one ``--seed``: trial k uses seed + k
for its world perturbation, its model-error injection, and its in-hand
slip draws, so any single trial can be reproduced in isolation.
"""

import argparse
import csv
import hashlib
import json
import os
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .augment import augment_demonstration
from .constraint_fit import ConstraintModel
from .demo import (load_demonstration, phases_from_json, phases_to_json,
                   save_demonstration)
from .errors import EcLfdError, ParseError, ValidationError
from .policy import (Correction, Policy, PolicyNode, apply_correction,
                     build_policy, execute, load_policy, save_policy)
from .primitives import ExecConfig
from .scenarios import make_correction, make_scenario
from .se3 import rotation_about_axis
from .segmentation import SegmenterConfig, segment
from .world import perturb_pose

_CONFIG_KEYS = ("tvd_lambda", "f_max", "v_max", "record_every")


def _load_config(path: str | None) -> dict:
    """Effective config dict from --config, EC_LFD_CONFIG, or defaults."""
    if path is None:
        path = os.environ.get("EC_LFD_CONFIG")
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read config file {path!r}: {e}") from e
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"config file {path!r} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ValidationError("config file must hold a JSON object")
    for key in cfg:
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"unknown config key {key!r}")
    return cfg


def _config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _segmenter_config(cfg: dict, tvd_lambda: float | None) -> SegmenterConfig:
    seg = SegmenterConfig()
    if "tvd_lambda" in cfg:
        seg = replace(seg, tvd_lambda=float(cfg["tvd_lambda"]))
    if tvd_lambda is not None:
        seg = replace(seg, tvd_lambda=float(tvd_lambda))
    return seg


def _exec_config(cfg: dict) -> ExecConfig:
    ex = ExecConfig()
    ctrl = ex.controller
    if "f_max" in cfg:
        f_max = np.asarray(cfg["f_max"], dtype=float)
        if f_max.shape != (6,):
            raise ValidationError("config f_max must list six values")
        ctrl = replace(ctrl, f_max=f_max)
    if "v_max" in cfg:
        v_max = np.asarray(cfg["v_max"], dtype=float)
        if v_max.shape != (6,):
            raise ValidationError("config v_max must list six values")
        ctrl = replace(ctrl, v_max=v_max)
    ex = replace(ex, controller=ctrl)
    if "record_every" in cfg:
        ex = replace(ex, record_every=int(cfg["record_every"]))
    return ex


def _parse_params(text: str | None) -> dict | None:
    if text is None:
        return None
    try:
        params = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"--params is not valid JSON: {e}") from e
    if not isinstance(params, dict):
        raise ValidationError("--params must be a JSON object")
    return params


_AXIS_ERROR = re.compile(
    r"^\s*([0-9.]+)\s*deg\s*,\s*([0-9.]+)\s*m\s*$")


def _parse_axis_error(text: str) -> tuple[float, float]:
    m = _AXIS_ERROR.match(text)
    if m is None:
        raise ValidationError(
            "--inject-axis-error expects '<deg>deg,<m>m', e.g. '20deg,0.10m'")
    return float(m.group(1)), float(m.group(2))


def _random_perpendicular(axis: np.ndarray,
                          rng: np.random.Generator) -> np.ndarray:
    for _ in range(16):
        v = rng.normal(size=3)
        v = v - (v @ axis) * axis
        n = np.linalg.norm(v)
        if n > 1e-9:
            return v / n
    raise ValidationError("could not draw a perpendicular direction")


def _inject_axis_error(policy: Policy, rot_rad: float, trans_m: float,
                       rng: np.random.Generator) -> Policy:
    """Corrupt every rotation node's model by a tilt and a hinge offset."""
    nodes = []
    for node in policy.nodes:
        prim = node.primitive
        if node.kind == "rotation" and prim.model is not None:
            axis = prim.model.axis / np.linalg.norm(prim.model.axis)
            tilt_about = _random_perpendicular(axis, rng)
            new_axis = rotation_about_axis(tilt_about,
                                           rot_rad).rotation() @ axis
            offset_along = _random_perpendicular(axis, rng)
            model = ConstraintModel(
                kind="rotation", axis=new_axis,
                point=prim.model.point + trans_m * offset_along,
                residual=prim.model.residual, radius=prim.model.radius)
            prim = replace(prim, model=model)
            node = PolicyNode(name=node.name, kind=node.kind,
                              primitive=prim,
                              expected_event=node.expected_event)
        nodes.append(node)
    return Policy(nodes=nodes)


def _write_trace(path: Path, records: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "fx", "fy", "fz", "tx", "ty", "tz"])
        for row in records:
            writer.writerow([f"{v:.9f}" for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e}") from e


# ---------------------------------------------------------------------------
# subcommands


def cmd_scenario(args) -> int:
    params = _parse_params(args.params)
    if params and "correction" in params:
        demo = make_correction(args.name, int(params["correction"]),
                               seed=args.seed)
    else:
        _, demo = make_scenario(args.name, params, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_demonstration(demo, out)
    truth_path = out.with_name(out.stem + ".truth.json")
    _write_json(truth_path, demo.truth)
    print(f"wrote {out} ({len(demo.waypoints)} waypoints) and {truth_path}")
    return 0


def cmd_segment(args) -> int:
    demo = load_demonstration(Path(args.demo))
    seg_cfg = _segmenter_config(_load_config(args.config), args.tvd_lambda)
    phases = segment(demo, seg_cfg)
    _write_json(Path(args.out), {"phases": phases_to_json(phases)})
    print(f"wrote {args.out} ({len(phases)} phases)")
    return 0


def _load_phases(path: Path) -> list:
    obj = _read_json(path)
    if not isinstance(obj, dict) or "phases" not in obj:
        raise ParseError(f"{path} does not hold a phases object")
    return phases_from_json(obj["phases"])


def cmd_augment(args) -> int:
    demo = load_demonstration(Path(args.demo))
    phases = _load_phases(Path(args.phases))
    world, _ = make_scenario(args.scenario, _parse_params(args.params),
                             seed=args.seed)
    labeled = augment_demonstration(
        world, demo, phases, noise_sigma=args.probe_noise,
        rng=np.random.default_rng(args.seed))
    _write_json(Path(args.out), {"phases": phases_to_json(labeled)})
    print(f"wrote {args.out} ({len(labeled)} labeled phases)")
    return 0


def cmd_build(args) -> int:
    demo = load_demonstration(Path(args.demo))
    phases = _load_phases(Path(args.phases))
    world, _ = make_scenario(args.scenario, _parse_params(args.params),
                             seed=args.seed)
    policy = build_policy(world, demo, phases)
    save_policy(policy, Path(args.out))
    print(f"wrote {args.out} ({len(policy.nodes)} nodes)")
    return 0


def _trial_result(index: int, seed: int, log, trace_name: str) -> dict:
    peak = 0.0
    for row in log.records:
        peak = max(peak, float(np.linalg.norm(row[1:4])))
    engagement = None
    if log.sim.engagement is not None:
        engagement = {"region": log.sim.engagement.region_id,
                      "coord": round(float(log.sim.engagement.coord), 9)}
    return {
        "trial": index,
        "seed": seed,
        "success": bool(log.success),
        "events": [[name, event] for name, event in log.node_events],
        "failure": log.failure.to_json() if log.failure else None,
        "violations": int(log.violations),
        "ticks": int(log.ticks),
        "peak_force_norm": round(peak, 9),
        "peak_wrench": [round(float(v), 9) for v in log.peak_wrench],
        "node_spans": [[n, int(a), int(b)] for n, a, b in log.node_spans],
        "final_engagement": engagement,
        "trace": trace_name,
    }


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    exec_cfg = _exec_config(cfg)
    policy = load_policy(Path(args.policy))
    params = _parse_params(args.params)
    world, _ = make_scenario(args.scenario, params, seed=0)
    axis_error = (None if args.inject_axis_error is None
                  else _parse_axis_error(args.inject_axis_error))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    for i in range(args.trials):
        trial_seed = args.seed + i
        trial_world = world
        if args.perturb_rot_deg > 0.0 or args.perturb_trans_m > 0.0:
            trial_world = perturb_pose(world, args.perturb_rot_deg,
                                       args.perturb_trans_m, seed=trial_seed)
        if args.slip_per_phase_deg > 0.0:
            trial_world = replace(trial_world,
                                  slip_per_phase_deg=args.slip_per_phase_deg)
        trial_policy = policy
        if axis_error is not None:
            trial_policy = _inject_axis_error(
                policy, np.deg2rad(axis_error[0]), axis_error[1],
                np.random.default_rng([trial_seed, 1]))
        start = trial_policy.nodes[0].primitive.trajectory[0].pose
        log = execute(trial_policy, trial_world, start, cfg=exec_cfg,
                      rng=np.random.default_rng(trial_seed),
                      adapt=not args.no_adapt)
        trace_name = f"trial{i:02d}.csv"
        _write_trace(out_dir / trace_name, log.records)
        results.append(_trial_result(i, trial_seed, log, trace_name))

    success_count = sum(1 for r in results if r["success"])
    peaks = [r["peak_force_norm"] for r in results]
    report = {
        "scenario": args.scenario,
        "params": params or {},
        "policy": Path(args.policy).name,
        "config_hash": _config_hash(cfg),
        "adapt": not args.no_adapt,
        "trials": args.trials,
        "base_seed": args.seed,
        "seeds": [r["seed"] for r in results],
        "perturb_rot_deg": args.perturb_rot_deg,
        "perturb_trans_m": args.perturb_trans_m,
        "slip_per_phase_deg": args.slip_per_phase_deg,
        "axis_error": (None if axis_error is None
                       else {"rot_deg": axis_error[0],
                             "trans_m": axis_error[1]}),
        "success_count": success_count,
        "peak_force_norm_max": round(max(peaks), 9),
        "peak_force_norm_mean": round(float(np.mean(peaks)), 9),
        "results": results,
        "outputs": [r["trace"] for r in results],
    }
    report_path = out_dir / "report.json"
    _write_json(report_path, report)
    print(f"{success_count}/{args.trials} succeeded; report {report_path}")
    return 0


def _target_from_report(path: Path) -> str:
    obj = _read_json(path)
    if isinstance(obj, dict) and "node" in obj:
        return str(obj["node"])
    if isinstance(obj, dict) and "results" in obj:
        for result in obj["results"]:
            failure = result.get("failure")
            if failure is not None:
                return str(failure["node"])
        raise ValidationError(f"{path} reports no failed trial to correct")
    raise ParseError(f"{path} is neither a failure report nor a run report")


def cmd_correct(args) -> int:
    policy = load_policy(Path(args.policy))
    demo = load_demonstration(Path(args.demo))
    if args.target is not None:
        target = args.target
    elif args.report is not None:
        target = _target_from_report(Path(args.report))
    else:
        raise ValidationError("correct needs --target or --report")
    corrected = apply_correction(policy, Correction(target, demo))
    save_policy(corrected, Path(args.out))
    print(f"wrote {args.out} (corrected node {target!r})")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _add_scenario_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("scenario", help="scenario name, e.g. key_lock")
    p.add_argument("--params", default=None,
                   help="scenario parameters as a JSON object")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ec-lfd",
        description="One-shot learning of constraint-aware policies from a "
                    "single synthetic demonstration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="export a demonstration fixture")
    p.add_argument("name")
    p.add_argument("--params", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="demonstration .jsonl path")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("segment", help="split a demonstration into phases")
    p.add_argument("demo")
    p.add_argument("--tvd-lambda", type=float, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("augment",
                       help="label phases by replays against the world")
    p.add_argument("demo")
    p.add_argument("phases")
    _add_scenario_args(p)
    p.add_argument("--probe-noise", type=float, default=0.0,
                   help="position noise sigma during probe reads, meters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("build", help="compile labeled phases into a policy")
    p.add_argument("demo")
    p.add_argument("phases")
    _add_scenario_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("run", help="evaluate a policy over seeded trials")
    p.add_argument("policy")
    _add_scenario_args(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--perturb-rot-deg", type=float, default=0.0)
    p.add_argument("--perturb-trans-m", type=float, default=0.0)
    p.add_argument("--slip-per-phase-deg", type=float, default=0.0)
    p.add_argument("--inject-axis-error", default=None, metavar="SPEC",
                   help="corrupt rotation models, e.g. '20deg,0.10m'")
    p.add_argument("--no-adapt", action="store_true",
                   help="open-loop baseline: no alignment, no trackers, "
                        "no force limiting")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("correct",
                       help="fold a recovery demonstration into a policy")
    p.add_argument("policy")
    p.add_argument("--demo", required=True,
                   help="recovery demonstration .jsonl")
    p.add_argument("--target", default=None, help="policy node to re-teach")
    p.add_argument("--report", default=None,
                   help="failure or run report naming the failed node")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correct)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except EcLfdError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
