"""Scene files: the operator-authored world state and its JSON schema.

Schema ``holoplan-scene/1``. Poses, obstacles, and protection zones are
authored in the scene's declared frame (the console world by default) and
mapped into the robot base frame through the calibration transform before
planning. Workspace bounds are a planning artifact and are given directly
in the robot base frame. Units are meters and radians; quaternions are
scalar-first everywhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .ik import IkConfig
from .planning import Box, Obstacle, PlannerSettings, Sphere
from .se3 import FrameId, Pose, Quaternion, Transform
from .selection import DEFAULT_CADENCE_HZ, DEFAULT_THRESHOLD
from .trajectory import ProtectionZone

SCENE_SCHEMA = "holoplan-scene/1"


class SchemaVersionUnsupported(ValueError):
    pass


class MalformedScene(ValueError):
    pass


@dataclass(frozen=True)
class SelectionSettings:
    threshold: float = DEFAULT_THRESHOLD
    cadence_hz: float = DEFAULT_CADENCE_HZ


@dataclass(frozen=True)
class Scene:
    calibration: Transform                  # maps scene-frame coords into the base
    start_pose: Pose
    end_pose: Pose
    middle_poses: tuple = ()
    obstacles: tuple = ()
    protection_zones: tuple = ()
    workspace_min: np.ndarray = field(default_factory=lambda: np.array([-1.2, -1.2, 0.0]))
    workspace_max: np.ndarray = field(default_factory=lambda: np.array([1.2, 1.2, 1.2]))
    planner: PlannerSettings = field(default_factory=PlannerSettings)
    ik: IkConfig = field(default_factory=IkConfig)
    selection: SelectionSettings = field(default_factory=SelectionSettings)
    duration: float = 10.0
    accel_bound: float = 2.0      # rad/s^2, trajectory validation limit
    jump_threshold: float = 0.35  # rad, IK branch-flip guard
    robot_model: str = "gen3_like"
    frame: FrameId = FrameId.WORLD
    # The file's quaternion is the stored truth for the calibration rotation:
    # matrix<->quaternion conversion is not bit-stable, byte round-trips are.
    calibration_rotation: Quaternion | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "workspace_min", np.asarray(self.workspace_min, dtype=float).reshape(3)
        )
        object.__setattr__(
            self, "workspace_max", np.asarray(self.workspace_max, dtype=float).reshape(3)
        )
        if self.calibration_rotation is None:
            object.__setattr__(
                self,
                "calibration_rotation",
                Quaternion.from_rotation_matrix(self.calibration.rotation),
            )


def _pose_to_dict(pose: Pose) -> dict:
    return {
        "position": [float(v) for v in pose.position],
        "orientation": [pose.orientation.w, pose.orientation.x,
                        pose.orientation.y, pose.orientation.z],
    }


def _unit_quat(values, what: str) -> Quaternion:
    """Validate near-unit and renormalize only when actually needed, so that
    already-normalized file bytes survive load/save unchanged."""
    q = Quaternion(*(float(v) for v in values))
    drift = abs(q.norm() - 1.0)
    if drift > 1e-6:
        raise MalformedScene(f"{what}: quaternion is not unit-norm")
    return q if drift <= 1e-9 else q.normalized()


def _pose_from_dict(data, what: str) -> Pose:
    try:
        position = [float(v) for v in data["position"]]
        q = _unit_quat(data["orientation"], what)
    except MalformedScene:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedScene(f"{what}: bad pose: {exc}") from exc
    if len(position) != 3:
        raise MalformedScene(f"{what}: position must have 3 components")
    return Pose(position, q)


def _obstacle_to_dict(obstacle: Obstacle) -> dict:
    shape = obstacle.shape
    out = {"id": obstacle.id, "margin": obstacle.margin}
    if isinstance(shape, Sphere):
        out["type"] = "sphere"
        out["center"] = [float(v) for v in shape.center]
        out["radius"] = shape.radius
    else:
        q = shape.orientation
        out["type"] = "box"
        out["center"] = [float(v) for v in shape.center]
        out["half_extents"] = [float(v) for v in shape.half_extents]
        out["orientation"] = [q.w, q.x, q.y, q.z]
    return out


def _obstacle_from_dict(data, what: str, cls=Obstacle):
    try:
        kind = data["type"]
        margin = float(data.get("margin", 0.0))
        oid = str(data["id"])
        if kind == "sphere":
            shape = Sphere(center=data["center"], radius=float(data["radius"]))
        elif kind == "box":
            quat = data.get("orientation", [1.0, 0.0, 0.0, 0.0])
            shape = Box(
                center=data["center"],
                half_extents=data["half_extents"],
                orientation=_unit_quat(quat, what),
            )
        else:
            raise ValueError(f"unknown shape type {kind!r}")
        return cls(id=oid, shape=shape, margin=margin)
    except MalformedScene:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedScene(f"{what}: {exc}") from exc


def scene_to_dict(scene: Scene) -> dict:
    q = scene.calibration_rotation
    planner = scene.planner
    ik = scene.ik
    return {
        "schema": SCENE_SCHEMA,
        "robot_model": scene.robot_model,
        "frame": scene.frame.value,
        "calibration": {
            "rotation": [q.w, q.x, q.y, q.z],
            "translation": [float(v) for v in scene.calibration.translation],
        },
        "start_pose": _pose_to_dict(scene.start_pose),
        "end_pose": _pose_to_dict(scene.end_pose),
        "middle_poses": [_pose_to_dict(p) for p in scene.middle_poses],
        "obstacles": [_obstacle_to_dict(o) for o in scene.obstacles],
        "protection_zones": [_obstacle_to_dict(z) for z in scene.protection_zones],
        "workspace": {
            "bounds_min": [float(v) for v in scene.workspace_min],
            "bounds_max": [float(v) for v in scene.workspace_max],
        },
        "planner": {
            "max_iterations": planner.max_iterations,
            "step": planner.step,
            "goal_bias": planner.goal_bias,
            "goal_radius": planner.goal_radius,
            "neighbor_gamma": planner.neighbor_gamma,
            "neighbor_radius_max": planner.neighbor_radius_max,
            "collision_resolution": planner.collision_resolution,
            "inflation": planner.inflation,
            "k": planner.k,
            "base_seed": planner.base_seed,
            "m": planner.m,
            "n_t": planner.n_t,
        },
        "ik": {
            "tolerance": ik.tolerance,
            "max_iterations": ik.max_iterations,
            "max_restarts": ik.max_restarts,
            "restart_seed": ik.restart_seed,
        },
        "selection": {
            "threshold": scene.selection.threshold,
            "cadence_hz": scene.selection.cadence_hz,
        },
        "duration": scene.duration,
        "accel_bound": scene.accel_bound,
        "jump_threshold": scene.jump_threshold,
    }


def save_scene(scene: Scene) -> bytes:
    """Canonical byte encoding: field order and separators are fixed."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":")).encode()


def scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise MalformedScene("scene document must be a JSON object")
    version = data.get("schema")
    if version != SCENE_SCHEMA:
        raise SchemaVersionUnsupported(f"unsupported scene schema: {version!r}")

    cal = data.get("calibration", {})
    try:
        cal_quat = _unit_quat(cal.get("rotation", [1.0, 0.0, 0.0, 0.0]), "calibration")
        calibration = Transform(
            cal_quat.to_rotation_matrix(), cal.get("translation", [0.0, 0.0, 0.0])
        )
    except MalformedScene:
        raise
    except (TypeError, ValueError) as exc:
        raise MalformedScene(f"calibration: {exc}") from exc

    if "start_pose" not in data or "end_pose" not in data:
        raise MalformedScene("scene requires start_pose and end_pose")

    ws = data.get("workspace", {})
    planner_data = data.get("planner", {})
    ik_data = data.get("ik", {})
    sel_data = data.get("selection", {})
    try:
        planner = replace(PlannerSettings(), **planner_data).validate()
        ik = replace(IkConfig(), **ik_data).validate()
        selection = SelectionSettings(
            threshold=float(sel_data.get("threshold", DEFAULT_THRESHOLD)),
            cadence_hz=float(sel_data.get("cadence_hz", DEFAULT_CADENCE_HZ)),
        )
        frame = FrameId(data.get("frame", "world"))
        duration = float(data.get("duration", 10.0))
        if duration <= 0:
            raise ValueError("duration must be positive")
        accel_bound = float(data.get("accel_bound", 2.0))
        jump_threshold = float(data.get("jump_threshold", 0.35))
        if accel_bound <= 0 or jump_threshold <= 0:
            raise ValueError("accel_bound and jump_threshold must be positive")
        scene = Scene(
            calibration=calibration,
            start_pose=_pose_from_dict(data["start_pose"], "start_pose"),
            end_pose=_pose_from_dict(data["end_pose"], "end_pose"),
            middle_poses=tuple(
                _pose_from_dict(p, f"middle_poses[{i}]")
                for i, p in enumerate(data.get("middle_poses", []))
            ),
            obstacles=tuple(
                _obstacle_from_dict(o, f"obstacles[{i}]")
                for i, o in enumerate(data.get("obstacles", []))
            ),
            protection_zones=tuple(
                _obstacle_from_dict(z, f"protection_zones[{i}]", cls=ProtectionZone)
                for i, z in enumerate(data.get("protection_zones", []))
            ),
            workspace_min=ws.get("bounds_min", [-1.2, -1.2, 0.0]),
            workspace_max=ws.get("bounds_max", [1.2, 1.2, 1.2]),
            planner=planner,
            ik=ik,
            selection=selection,
            duration=duration,
            accel_bound=accel_bound,
            jump_threshold=jump_threshold,
            robot_model=str(data.get("robot_model", "gen3_like")),
            frame=frame,
            calibration_rotation=cal_quat,
        )
    except MalformedScene:
        raise
    except (TypeError, ValueError) as exc:
        raise MalformedScene(str(exc)) from exc
    if np.any(scene.workspace_min >= scene.workspace_max):
        raise MalformedScene("workspace bounds must satisfy min < max per axis")
    return scene


def load_scene(blob) -> Scene:
    """Accepts bytes/str of JSON or an already-parsed dict."""
    if isinstance(blob, (bytes, str)):
        try:
            data = json.loads(blob)
        except json.JSONDecodeError as exc:
            raise MalformedScene(f"not valid JSON: {exc}") from exc
    else:
        data = blob
    return scene_from_dict(data)
