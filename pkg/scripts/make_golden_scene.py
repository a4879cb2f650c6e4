#!/usr/bin/env python3
"""Regenerate the golden pick-and-place scene and the selection trace.

Pick/place poses are derived from known-reachable configurations of the
default arm, expressed in a console world frame through a deliberately
nontrivial calibration, with a camera-like box obstacle between them.
"""

import json
import math
from pathlib import Path

import numpy as np

from holoplan.ik import IkConfig, IkStatus, solve_ik
from holoplan.planning import Box, Obstacle, segment_free
from holoplan.robot import forward_kinematics, load_robot_model
from holoplan.scene import Scene, SelectionSettings, load_scene, save_scene, scene_to_dict
from holoplan.se3 import FrameId, Pose, Quaternion, Transform
from holoplan.service import PlanningService, SessionState

OUT = Path(__file__).resolve().parent.parent / "scenes"


def main():
    model = load_robot_model("gen3_like")

    q_pick = model.home + np.array([-0.55, 0.15, 0.0, -0.15, 0.0, 0.05, 0.2])
    q_place = model.home + np.array([0.55, 0.10, 0.0, -0.20, 0.1, 0.20, -0.3])
    pick_base = forward_kinematics(model, q_pick)
    place_base = forward_kinematics(model, q_place)
    print("pick (base): ", np.round(pick_base.position, 3))
    print("place (base):", np.round(place_base.position, 3))

    # Calibration H_0^w: world coords -> base coords (yawed and offset).
    calibration = Transform.from_quaternion(
        Quaternion.from_axis_angle([0, 0, 1], math.radians(25.0)),
        [0.08, -0.06, 0.02],
    )
    to_world = calibration.inverse()

    def base_pose_to_world(pose):
        q_inv = Quaternion.from_rotation_matrix(to_world.rotation)
        return Pose(to_world.apply(pose.position), (q_inv * pose.orientation).normalized())

    # Camera-like obstacle between pick and place, centered on the midpoint
    # in base coords, standing like a pillar.
    mid = 0.5 * (pick_base.position + place_base.position)
    obstacle_base_center = np.array([mid[0], mid[1], mid[2]])
    obstacle = Obstacle(
        id="line_camera",
        shape=Box(
            center=to_world.apply(obstacle_base_center),
            half_extents=[0.05, 0.03, 0.22],
            orientation=Quaternion.from_rotation_matrix(to_world.rotation).normalized(),
        ),
        margin=0.0,
    )

    scene = Scene(
        calibration=calibration,
        start_pose=base_pose_to_world(pick_base),
        end_pose=base_pose_to_world(place_base),
        obstacles=(obstacle,),
        protection_zones=(),
        workspace_min=[0.05, -0.75, 0.05],
        workspace_max=[0.95, 0.75, 1.05],
        selection=SelectionSettings(),
        duration=10.0,
        robot_model="gen3_like",
        frame=FrameId.WORLD,
    )

    # Sanity: endpoints reachable, straight segment blocked, full run works.
    for name, pose in (("pick", pick_base), ("place", place_base)):
        res = solve_ik(model, pose, model.home, scene.ik)
        assert res.status is IkStatus.CONVERGED, f"{name} unreachable: {res}"
    service = PlanningService()
    sid = service.create_session()
    service.put_scene(sid, scene)
    session = service.session(sid)
    data = service._map_scene_to_base(scene, model)
    blocked = not segment_free(
        data["poses"]["start"].position,
        data["poses"]["end"].position,
        data["workspace"],
        scene.planner.collision_resolution,
        scene.planner.inflation,
    )
    assert blocked, "obstacle does not block the straight line; scene is trivial"
    paths = service.plan(sid)
    print("candidate costs:", [round(p.cost, 4) for p in paths])
    best = min(paths, key=lambda p: p.cost)
    service.select_path(sid, best.id)
    service.confirm(sid, best.id)
    for _ in service.execute(sid):
        pass
    assert session.state is SessionState.DONE
    print("golden run OK; exporting scene")

    OUT.mkdir(exist_ok=True)
    blob = save_scene(scene)
    # Keep the committed artifact human-readable but canonical in content.
    pretty = json.dumps(json.loads(blob), indent=2, sort_keys=True) + "\n"
    (OUT / "pick_and_place.json").write_text(pretty)
    load_scene((OUT / "pick_and_place.json").read_text())  # proves it round-trips

    trace = {
        "schema": "holoplan-trace/1",
        "cycles": [
            [{"path_id": 1, "marker": 50, "offset": [0.0, 0.0, 0.015]}],
            [{"path_id": 1, "marker": 50, "offset": [0.0, 0.0, 0.015]}],
            [{"path_id": 1, "marker": 51, "offset": [0.0, 0.0, 0.010]}],
        ],
    }
    (OUT / "trace_select_path1.json").write_text(json.dumps(trace, indent=2) + "\n")
    print("wrote", OUT / "pick_and_place.json", "and trace")


if __name__ == "__main__":
    main()
