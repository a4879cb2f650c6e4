"""Acceptance gate: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to get one PASS line per
criterion; any assertion failure marks that criterion red.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import GOAL, START, empty_workspace, gap_workspace, grid_dijkstra_length

from holoplan.cli import main as cli_main
from holoplan.ik import IkConfig, IkStatus, pose_error, solve_ik
from holoplan.planning import (
    CandidatePath,
    PathStatus,
    PlannerSettings,
    cosine_fraction,
    cosine_reparameterize,
    generate_candidates,
    plan_rrt_star,
    polyline_length,
    segment_free,
)
from holoplan.robot import forward_kinematics, jacobian, load_robot_model, sample_configuration
from holoplan.scene import load_scene
from holoplan.se3 import FrameId, FrameRegistry, Pose, Quaternion, map_pose, slerp
from holoplan.selection import CandidateSet, MarkerUpdate, apply_updates_and_detect
from holoplan.service import PlanningService, SessionState, ValidationFailed
from holoplan.stats import discrepancy_stats
from holoplan.trajectory import ProtectionZone

SCENES = Path(__file__).resolve().parent.parent / "scenes"


def report(line: str) -> None:
    print(f"[PASS] {line}")


# ---------------------------------------------------------------------------
# 1. SLERP correctness
# ---------------------------------------------------------------------------

def test_criterion_slerp_correctness():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        v = rng.normal(size=4)
        q1 = Quaternion(*(v / np.linalg.norm(v)))
        w = rng.normal(size=4)
        q2 = Quaternion(*(w / np.linalg.norm(w)))
        ts = np.linspace(0.0, 1.0, 1000)
        samples = [slerp(q1, q2, float(t)) for t in ts]

        assert samples[0].angle_to(q1) <= 1e-9, "endpoint recovery at t=0"
        assert samples[-1].angle_to(q2) <= 1e-9, "endpoint recovery at t=1"
        for q in samples:
            assert abs(q.norm() - 1.0) <= 1e-9, "unit norm along the sweep"
        steps = [samples[i].angle_to(samples[i + 1]) for i in range(999)]
        assert max(steps) - min(steps) <= 1e-9, "constant angular step"

    # Antipodal representations: same rotation throughout.
    q = Quaternion(1, 0, 0, 0)
    for t in (0.0, 0.25, 0.75, 1.0):
        out = slerp(q, Quaternion(-1, 0, 0, 0), t)
        assert out.angle_to(Quaternion.identity()) <= 1e-9

    # Near-zero angle: lerp fallback stays unit and continuous.
    q2 = Quaternion.from_axis_angle([0, 0, 1], 5e-10)
    mid = slerp(Quaternion.identity(), q2, 0.5)
    assert abs(mid.norm() - 1.0) <= 1e-9
    assert mid.angle_to(Quaternion.identity()) <= 1e-9

    report("SLERP: endpoints, unit norm, constant step (1e-9), antipodal + tiny angles")


# ---------------------------------------------------------------------------
# 2. Cosine reparameterization
# ---------------------------------------------------------------------------

def test_criterion_cosine_reparameterization():
    assert float(cosine_fraction(0.0)) == 0.0
    assert float(cosine_fraction(1.0)) == 1.0
    # Exact up to one floating-point ulp of cos(pi/3).
    assert abs(float(cosine_fraction(1.0 / 3.0)) - 0.25) <= 1e-15

    s = np.linspace(0.0, 1.0, 2001)
    f = cosine_fraction(s)
    assert np.all(np.diff(f) > 0), "strictly monotone"

    # Boundary per-step speed shrinks as O(1/N^2): the scaled first step
    # converges to pi^2/4.
    line = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    for n_t in (50, 100, 200):
        out = cosine_reparameterize(line, n_t)
        first = float(np.linalg.norm(out[1] - out[0]))
        assert first * (n_t - 1) ** 2 == pytest.approx(math.pi**2 / 4, rel=0.01)

    report("cosine timing: f(0)=0, f(1)=1, f(1/3)=0.25 (ulp), monotone, O(1/N^2) boundary")


# ---------------------------------------------------------------------------
# 3. IK round trip
# ---------------------------------------------------------------------------

def test_criterion_ik_round_trip():
    t0 = time.time()
    model = load_robot_model("gen3_like")
    no_restart = IkConfig(max_restarts=0)
    with_restarts = IkConfig(max_restarts=10)

    converged_first = 0
    failures = []
    for i in range(100):
        q_star = sample_configuration(model, 20_000 + i)
        target = forward_kinematics(model, q_star)
        res = solve_ik(model, target, model.home, no_restart)
        assert model.within_limits(res.q), "result within joint limits"
        if res.status is IkStatus.CONVERGED and res.pose_error_norm < 1e-4:
            converged_first += 1
        else:
            failures.append(i)
    assert converged_first >= 98, f"only {converged_first}/100 without restarts"

    recovered = converged_first
    for i in failures:
        q_star = sample_configuration(model, 20_000 + i)
        target = forward_kinematics(model, q_star)
        res = solve_ik(model, target, model.home, with_restarts)
        assert model.within_limits(res.q)
        assert res.restarts_used <= 10
        if res.status is IkStatus.CONVERGED and res.pose_error_norm < 1e-4:
            recovered += 1
    assert recovered == 100, f"{recovered}/100 with restarts"

    elapsed = time.time() - t0
    assert elapsed < 60.0, f"IK criterion took {elapsed:.1f}s"
    report(
        f"IK round trip: {converged_first}/100 no-restart, {recovered}/100 "
        f"with <=10 restarts, limits always ({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# 4. Jacobian vs finite differences
# ---------------------------------------------------------------------------

def test_criterion_jacobian_finite_difference():
    model = load_robot_model("gen3_like")
    h = 1e-6

    def rotation_log(r):
        cos_a = max(-1.0, min(1.0, (np.trace(r) - 1.0) / 2.0))
        angle = math.acos(cos_a)
        v = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
        if angle < 1e-10:
            return 0.5 * v
        return (angle / (2.0 * math.sin(angle))) * v

    worst = 0.0
    for i in range(100):
        q = sample_configuration(model, 9_000 + i)
        analytic = jacobian(model, q)
        numeric = np.zeros_like(analytic)
        for j in range(model.dof):
            dq = np.zeros(model.dof)
            dq[j] = h
            plus = forward_kinematics(model, q + dq)
            minus = forward_kinematics(model, q - dq)
            numeric[:3, j] = (plus.position - minus.position) / (2 * h)
            numeric[3:, j] = rotation_log(
                plus.orientation.to_rotation_matrix()
                @ minus.orientation.to_rotation_matrix().T
            ) / (2 * h)
        worst = max(worst, float(np.max(np.abs(analytic - numeric))))
    assert worst <= 1e-5, f"worst deviation {worst:.2e}"
    report(f"Jacobian vs central differences: worst {worst:.2e} <= 1e-5 at 100 states")


# ---------------------------------------------------------------------------
# 5 + 6. RRT* quality and candidate diversity
# ---------------------------------------------------------------------------

def test_criterion_rrt_star_quality_and_diversity():
    t0 = time.time()
    params = PlannerSettings(max_iterations=4000, inflation=0.0)

    # Empty scene: within 5% of the straight line for the whole seed suite.
    ws = empty_workspace()
    straight = float(np.linalg.norm(GOAL - START))
    for seed in range(1, 11):
        path = plan_rrt_star(START, GOAL, ws, params, seed=seed)
        assert path.cost <= 1.05 * straight, f"seed {seed}: {path.cost:.4f}"
        for i in range(len(path.waypoints) - 1):
            assert segment_free(path.waypoints[i], path.waypoints[i + 1], ws)

    # Wall with a gap: within 15% of a 1 cm occupancy-grid Dijkstra oracle.
    gap = gap_workspace()
    oracle = grid_dijkstra_length(gap, START, GOAL, res=0.01)
    gap_costs = []
    for seed in range(1, 11):
        path = plan_rrt_star(START, GOAL, gap, params, seed=seed)
        gap_costs.append(path.cost)
        assert path.cost <= 1.15 * oracle, (
            f"seed {seed}: {path.cost:.4f} vs oracle {oracle:.4f}"
        )
        for i in range(len(path.waypoints) - 1):
            assert segment_free(path.waypoints[i], path.waypoints[i + 1], gap)

    elapsed = time.time() - t0
    assert elapsed < 120.0, f"RRT* criterion took {elapsed:.1f}s"
    report(
        f"RRT*: empty <= 1.05x straight line (10 seeds), gap <= "
        f"{max(c / oracle for c in gap_costs):.3f}x Dijkstra oracle, "
        f"segments collision-free ({elapsed:.1f}s)"
    )

    # Diversity: K=4 on the gap scene, >=2 distinct costs, each run bitwise
    # reproducible.
    batch_a = generate_candidates(START, GOAL, gap, params, base_seed=1, K=4)
    batch_b = generate_candidates(START, GOAL, gap, params, base_seed=1, K=4)
    costs = [p.cost for p in batch_a.paths]
    assert len(batch_a.paths) == 4
    assert len(set(costs)) >= 2, f"costs not diverse: {costs}"
    for pa, pb in zip(batch_a.paths, batch_b.paths):
        assert pa.waypoints.tobytes() == pb.waypoints.tobytes()
        assert pa.cost == pb.cost
    report(
        f"candidate diversity: K=4 costs {sorted(round(c, 4) for c in costs)}, "
        "each run bitwise reproducible"
    )


# ---------------------------------------------------------------------------
# 7. Selection protocol
# ---------------------------------------------------------------------------

def test_criterion_selection_protocol():
    def fresh_set():
        paths = []
        for pid in range(4):
            pts = np.array([[i * 0.04, 0.1 * pid, 0.3] for i in range(12)])
            paths.append(
                CandidatePath(id=pid, waypoints=pts, cost=polyline_length(pts), seed=pid)
            )
        return CandidateSet.from_candidates("acc", paths, threshold=0.010)

    def check_partition(cset):
        statuses = list(cset.statuses().values())
        selected = statuses.count(PathStatus.SELECTED)
        assert selected <= 1
        if selected == 1:
            assert statuses.count(PathStatus.DISCARDED) == len(statuses) - 1
        else:
            assert all(s is PathStatus.PROPOSED for s in statuses)

    # (a) No motion across many 60 Hz cycles: no selection.
    cset = fresh_set()
    for cycle in range(60):
        assert apply_updates_and_detect(cset, []) is None
        check_partition(cset)
    assert all(s is PathStatus.PROPOSED for s in cset.statuses().values())

    # (b) Single 30 mm move: that path Selected, the rest Discarded.
    cset = fresh_set()
    pos = cset.paths[2].waypoints[5] + np.array([0.0, 0.0, 0.030])
    event = apply_updates_and_detect(cset, [MarkerUpdate(2, 5, pos, seq=0)])
    check_partition(cset)
    assert event is not None and event.selected_id == 2
    assert event.discarded_ids == (0, 1, 3)

    # (c) Simultaneous 30 mm and 40 mm moves: the larger delta wins.
    cset = fresh_set()
    p30 = cset.paths[3].waypoints[5] + np.array([0.0, 0.0, 0.030])
    p40 = cset.paths[1].waypoints[5] + np.array([0.0, 0.0, 0.040])
    event = apply_updates_and_detect(
        cset,
        [MarkerUpdate(3, 5, p30, seq=0), MarkerUpdate(1, 5, p40, seq=1)],
    )
    check_partition(cset)
    assert event is not None and event.selected_id == 1

    report("selection protocol: no-motion, 30 mm single move, 30/40 mm tie-break, partition invariant")


# ---------------------------------------------------------------------------
# 8. Statistics utility
# ---------------------------------------------------------------------------

def test_criterion_statistics_consistency():
    dx = math.sqrt(2 * 25.5)
    dy = math.sqrt(2 * 19.9)
    samples = [
        [1.0 + dx / 2, -1.2 + dy / 2],
        [1.0 - dx / 2, -1.2 - dy / 2],
    ]
    out = discrepancy_stats(samples)
    assert out["x"].variance == pytest.approx(25.5, abs=1e-9)
    assert out["y"].variance == pytest.approx(19.9, abs=1e-9)
    assert out["x"].stddev == pytest.approx(5.0497, abs=1e-3)
    assert out["y"].stddev == pytest.approx(4.4609, abs=1e-3)
    assert abs(out["x"].stddev - 5.1) <= 0.1
    assert abs(out["y"].stddev - 4.5) <= 0.1
    report(
        "statistics: sqrt(25.5)=5.05 within 0.1 of 5.1; sqrt(19.9)=4.46 within 0.1 of 4.5"
    )


# ---------------------------------------------------------------------------
# 9. End-to-end golden pick-and-place
# ---------------------------------------------------------------------------

def test_criterion_end_to_end_golden_scenario(tmp_path):
    t0 = time.time()
    script = tmp_path / "script.json"
    script.write_text(
        json.dumps(
            {
                "scene": str(SCENES / "pick_and_place.json"),
                "actions": [
                    {"plan": {"k": 4}},
                    {"select": "lowest-cost"},
                    {"confirm": {}},
                    {"execute": {}},
                    {"export": "trajectory.json"},
                ],
            }
        )
    )
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli_main(["run", "--script", str(script), "--out", str(out_a)]) == 0
    assert cli_main(["run", "--script", str(script), "--out", str(out_b)]) == 0

    # Byte-identical trajectory export across runs with identical seeds.
    blob_a = (out_a / "trajectory.json").read_bytes()
    blob_b = (out_b / "trajectory.json").read_bytes()
    assert blob_a == blob_b

    # Final streamed tool pose equals the commanded end pose within 1e-4.
    frames = [
        json.loads(line)
        for line in (out_a / "execution_log.jsonl").read_text().splitlines()
    ]
    assert frames[-1]["kind"] == "done"
    last = frames[-2]
    scene = load_scene((SCENES / "pick_and_place.json").read_bytes())
    registry = FrameRegistry()
    registry.register(scene.frame, FrameId.ROBOT_BASE, scene.calibration)
    end_base = map_pose(scene.end_pose, scene.frame, FrameId.ROBOT_BASE, registry)
    tool = Pose(last["tool"]["position"], Quaternion(*last["tool"]["orientation"]))
    final_err = pose_error(tool, end_base).norm
    assert final_err <= 1e-4

    elapsed = time.time() - t0
    assert elapsed < 60.0, f"golden scenario took {elapsed:.1f}s"
    report(
        f"golden pick-and-place: exit 0, final pose error {final_err:.2e} <= 1e-4, "
        f"byte-identical exports ({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# 10. Protection-zone fault
# ---------------------------------------------------------------------------

def test_criterion_protection_zone_fault():
    from dataclasses import replace

    from holoplan.planning import Sphere

    scene = load_scene((SCENES / "pick_and_place.json").read_bytes())
    quick = replace(scene, planner=replace(scene.planner, k=2, max_iterations=1500))

    # First pass: find a real mid-trajectory tool position.
    service = PlanningService()
    sid = service.create_session()
    service.put_scene(sid, quick)
    service.plan(sid)
    service.select_path(sid, 0)
    trajectory = service.confirm(sid, 0)
    session = service.session(sid)
    mid_tool = forward_kinematics(
        session.model, trajectory.q[len(trajectory) // 2]
    ).position

    # Second pass: same plan with a protection zone parked on that waypoint.
    zone_world = quick.calibration.inverse().apply(mid_tool)
    guarded = replace(
        quick,
        protection_zones=(
            ProtectionZone(id="keepout_mid", shape=Sphere(center=zone_world, radius=0.02)),
        ),
    )
    service2 = PlanningService()
    sid2 = service2.create_session()
    service2.put_scene(sid2, guarded)
    service2.plan(sid2)
    service2.select_path(sid2, 0)
    with pytest.raises(ValidationFailed) as info:
        service2.confirm(sid2, 0)
    names = {v.zone_id for v in info.value.report.violations if v.kind == "protection_zone"}
    assert names == {"keepout_mid"}
    assert service2.session(sid2).state is SessionState.FAULT
    report("protection zone: ValidationFailed names the zone over the known waypoint")
