"""Headless driver: plan scenes, run scripted scenarios, serve the console,
and crunch discrepancy samples without any UI attached.

Exit codes: 0 ok, 2 planning failed, 3 unreachable waypoint,
4 validation failed, 5 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .planning import (
    AllRunsFailed,
    GoalInCollision,
    PlanningFailed,
    StartInCollision,
)
from .scene import MalformedScene, SchemaVersionUnsupported, load_scene
from .selection import MarkerUpdate
from .service import OrderRejected, PlanningService, ValidationFailed
from .stats import InsufficientSamples, discrepancy_stats
from .trajectory import JointJump, VelocityLimitExceeded, WaypointUnreachable

EXIT_OK = 0
EXIT_PLANNING = 2
EXIT_UNREACHABLE = 3
EXIT_VALIDATION = 4
EXIT_BAD_INPUT = 5

TRACE_SCHEMA = "holoplan-trace/1"


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_scene_file(path: str):
    blob = Path(path).read_bytes()
    return load_scene(blob)


def _write_candidates(session, out_dir: Path) -> None:
    payload = {
        "session": session.id,
        "candidates": [
            PlanningService._candidate_payload(p, session.advisory)
            for p in session.candidates
        ],
        "failures": [{"run": f.run, "reason": f.reason} for f in session.failures],
    }
    (out_dir / "candidates.json").write_text(json.dumps(payload, indent=2) + "\n")


def cmd_plan(args) -> int:
    out_dir = Path(args.out)
    try:
        scene = _load_scene_file(args.scene)
    except FileNotFoundError:
        return _fail(EXIT_BAD_INPUT, f"scene file not found: {args.scene}")
    except (MalformedScene, SchemaVersionUnsupported) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad scene: {exc}")

    out_dir.mkdir(parents=True, exist_ok=True)
    service = PlanningService()
    sid = service.create_session()
    service.put_scene(sid, scene)
    try:
        paths = service.plan(sid, k=args.candidates, base_seed=args.seed)
    except (PlanningFailed, AllRunsFailed, StartInCollision, GoalInCollision) as exc:
        session = service.session(sid)
        _write_candidates(session, out_dir)
        return _fail(EXIT_PLANNING, f"planning failed: {exc}")
    session = service.session(sid)
    _write_candidates(session, out_dir)
    for p in paths:
        print(f"candidate {p.id}: cost {p.cost:.4f} m (seed {p.seed})")
    return EXIT_OK


def _replay_trace(service, sid, trace_path: Path):
    data = json.loads(trace_path.read_text())
    if data.get("schema") != TRACE_SCHEMA:
        raise MalformedScene(f"unsupported trace schema: {data.get('schema')!r}")
    session = service.session(sid)
    seq = 0
    for cycle in data.get("cycles", []):
        updates = []
        for move in cycle:
            path = session.candidate_set.paths[int(move["path_id"])]
            marker = int(move["marker"])
            position = path.waypoints[marker] + np.asarray(move["offset"], dtype=float)
            updates.append(
                MarkerUpdate(
                    path_id=path.id, marker=marker, position=position, seq=seq
                )
            )
            seq += 1
        service.queue_marker_updates(sid, updates)
        service.selection_cycle(sid)
    return session.candidate_set.selected_id


def _auto_select(service, sid, rule, out_dir: Path) -> int | None:
    session = service.session(sid)
    if isinstance(rule, dict) and "trace" in rule:
        selected = _replay_trace(service, sid, Path(rule["trace"]))
        if selected is None:
            return None
        return selected
    if rule == "first":
        chosen = session.candidates[0].id
    elif rule == "lowest-cost":
        chosen = min(session.candidates, key=lambda p: (p.cost, p.id)).id
    else:
        raise MalformedScene(f"unknown select rule: {rule!r}")
    service.select_path(sid, chosen)
    return chosen


def cmd_run(args) -> int:
    out_dir = Path(args.out)
    try:
        script = json.loads(Path(args.script).read_text())
        scene = _load_scene_file(script["scene"])
        actions = script["actions"]
    except FileNotFoundError as exc:
        return _fail(EXIT_BAD_INPUT, f"missing file: {exc}")
    except (KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad script: {exc}")
    except (MalformedScene, SchemaVersionUnsupported) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad scene: {exc}")

    out_dir.mkdir(parents=True, exist_ok=True)
    service = PlanningService()
    sid = service.create_session()
    service.put_scene(sid, scene)
    selected = None

    try:
        for action in actions:
            if "plan" in action:
                opts = action["plan"] or {}
                service.plan(sid, k=opts.get("k"), base_seed=opts.get("seed"))
                _write_candidates(service.session(sid), out_dir)
            elif "select" in action:
                selected = _auto_select(service, sid, action["select"], out_dir)
                if selected is None:
                    return _fail(EXIT_BAD_INPUT, "trace produced no selection")
                session = service.session(sid)
                chosen = session.candidate_set.paths[selected]
                (out_dir / "selected.json").write_text(
                    json.dumps(
                        {
                            "path_id": selected,
                            "cost": chosen.cost,
                            "waypoints": chosen.waypoints.tolist(),
                        },
                        indent=2,
                    )
                    + "\n"
                )
                print(f"selected path {selected}")
            elif "confirm" in action:
                if selected is None:
                    return _fail(EXIT_BAD_INPUT, "confirm before select")
                service.confirm(sid, selected)
            elif "execute" in action:
                log = out_dir / "execution_log.jsonl"
                with log.open("w") as fh:
                    for frame in service.execute(sid, pace=False):
                        fh.write(json.dumps(frame) + "\n")
                print(f"executed to done; log at {log}")
            elif "export" in action:
                blob = service.export_trajectory(sid)
                target = out_dir / (action["export"] or "trajectory.json")
                target.write_bytes(blob)
                print(f"trajectory exported to {target}")
            else:
                return _fail(EXIT_BAD_INPUT, f"unknown action: {action}")
    except (PlanningFailed, AllRunsFailed, StartInCollision, GoalInCollision) as exc:
        return _fail(EXIT_PLANNING, f"planning failed: {exc}")
    except WaypointUnreachable as exc:
        return _fail(EXIT_UNREACHABLE, str(exc))
    except (ValidationFailed, OrderRejected, JointJump, VelocityLimitExceeded) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (MalformedScene, KeyError, json.JSONDecodeError) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad input: {exc}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    service = PlanningService(
        workers=args.workers, execution_rate_hz=args.exec_rate, pace=not args.no_pace
    )
    app = create_app(service, frontend_dir=args.frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_stats(args) -> int:
    path = Path(args.samples)
    try:
        text = path.read_text()
    except FileNotFoundError:
        return _fail(EXIT_BAD_INPUT, f"samples file not found: {path}")
    rows = []
    try:
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"expected 2 columns, got {len(parts)}: {line!r}")
            rows.append([float(parts[0]), float(parts[1])])
        stats = discrepancy_stats(rows)
    except (ValueError, InsufficientSamples) as exc:
        return _fail(EXIT_BAD_INPUT, f"bad samples file: {exc}")

    print(f"{'axis':<6}{'mean (mm)':>12}{'variance (mm^2)':>18}{'stddev (mm)':>14}")
    for axis in ("x", "y"):
        s = stats[axis]
        print(f"{axis:<6}{s.mean:>12.3f}{s.variance:>18.3f}{s.stddev:>14.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holoplan",
        description="Human-guided motion planning engine: plan, run, serve, stats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="plan candidates for a scene file")
    p_plan.add_argument("--scene", required=True)
    p_plan.add_argument("--candidates", type=int, default=None)
    p_plan.add_argument("--seed", type=int, default=None)
    p_plan.add_argument("--out", default="out")
    p_plan.set_defaults(func=cmd_plan)

    p_run = sub.add_parser("run", help="run a scripted scenario end to end")
    p_run.add_argument("--script", required=True)
    p_run.add_argument("--out", default="out")
    p_run.set_defaults(func=cmd_run)

    p_serve = sub.add_parser("serve", help="serve the wire protocol (and console)")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--workers", type=int, default=4)
    p_serve.add_argument("--exec-rate", type=float, default=10.0)
    p_serve.add_argument("--no-pace", action="store_true",
                         help="stream execution frames without real-time pacing")
    p_serve.add_argument("--frontend", default=None,
                         help="directory of built console assets to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    p_stats = sub.add_parser("stats", help="discrepancy statistics for a samples file")
    p_stats.add_argument("--samples", required=True)
    p_stats.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
