"""Tool schedules and joint trajectories: fuse timed positions with a SLERP
orientation schedule, solve IK per waypoint with warm starts, differentiate
to joint rates, and validate against limits and protection zones.

The SLERP parameter is tied to each vertex's normalized arc-length fraction,
not its time index, so rotation progresses uniformly along the path however
the samples are spaced in time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .ik import IkConfig, IkStatus, solve_ik
from .planning import Obstacle
from .robot import RobotModel, forward_kinematics
from .se3 import Pose, Quaternion, slerp

TRAJECTORY_SCHEMA = "holoplan-trajectory/1"

# Consecutive-waypoint joint moves beyond this are treated as an IK branch
# flip rather than legitimate motion.
DEFAULT_JUMP_THRESHOLD = 0.35  # rad

DEFAULT_ACCEL_BOUND = 2.0  # rad/s^2


class InvalidDuration(ValueError):
    pass


class WaypointUnreachable(RuntimeError):
    def __init__(self, index: int, detail: str = ""):
        super().__init__(f"waypoint {index} unreachable{': ' + detail if detail else ''}")
        self.index = index


class JointJump(RuntimeError):
    def __init__(self, index: int, magnitude: float):
        super().__init__(
            f"joint jump at waypoint {index}: max |dq| = {magnitude:.3f} rad"
        )
        self.index = index
        self.magnitude = magnitude


class VelocityLimitExceeded(RuntimeError):
    def __init__(self, index: int, joint: int, value: float, limit: float):
        super().__init__(
            f"velocity limit exceeded at sample {index}, joint {joint}: "
            f"|{value:.3f}| > {limit:.3f} rad/s"
        )
        self.index = index
        self.joint = joint


class ProtectionZone(Obstacle):
    """Region the tool must never enter; independent of planning obstacles."""


@dataclass(frozen=True)
class ToolSchedule:
    times: np.ndarray
    poses: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.times) != len(self.poses):
            raise ValueError("times and poses must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self):
        return len(self.poses)


@dataclass(frozen=True)
class JointTrajectory:
    times: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    model_name: str

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "qd", np.asarray(self.qd, dtype=float))

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class Violation:
    kind: str           # "velocity" | "acceleration" | "protection_zone"
    index: int
    detail: str
    joint: int | None = None
    zone_id: str | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations


def arc_fractions(points: np.ndarray) -> np.ndarray:
    """Normalized cumulative arc length per vertex; index fractions if static."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= 0.0:
        return np.linspace(0.0, 1.0, len(points))
    return arc / total


def build_tool_schedule(
    timed_vertices,
    start_rot: Quaternion,
    end_rot: Quaternion,
    duration: float,
) -> ToolSchedule:
    """Attach a SLERP orientation schedule to timed path vertices.

    Vertex k gets orientation slerp(start_rot, end_rot, s_k) with s_k its
    normalized arc-length fraction; timestamps are uniform over [0, duration].
    """
    vertices = np.asarray(timed_vertices, dtype=float).reshape(-1, 3)
    if len(vertices) < 2:
        raise ValueError("need at least two vertices")
    if duration <= 0.0:
        raise InvalidDuration(f"duration must be positive, got {duration}")
    fractions = arc_fractions(vertices)
    poses = [
        Pose(v, slerp(start_rot, end_rot, float(s)))
        for v, s in zip(vertices, fractions)
    ]
    times = np.linspace(0.0, duration, len(vertices))
    return ToolSchedule(times=times, poses=poses)


def build_joint_trajectory(
    model: RobotModel,
    schedule: ToolSchedule,
    ik_config: IkConfig | None = None,
    initial_seed=None,
    jump_threshold: float = DEFAULT_JUMP_THRESHOLD,
) -> JointTrajectory:
    """Solve IK along the schedule, warm-starting each waypoint from the last.

    Restarts are allowed only on the first waypoint; interior waypoints must
    track continuously from the warm start, and a configuration flip larger
    than jump_threshold raises JointJump. Joint rates come from central
    finite differences (one-sided at the ends) and are checked against the
    model's velocity limits.
    """
    cfg = ik_config or IkConfig()
    seed = model.home if initial_seed is None else model.check_q(initial_seed)
    interior_cfg = replace(cfg, max_restarts=0)

    n = len(schedule)
    q = np.zeros((n, model.dof))
    for k, pose in enumerate(schedule.poses):
        result = solve_ik(model, pose, seed, cfg if k == 0 else interior_cfg)
        if result.status is not IkStatus.CONVERGED:
            raise WaypointUnreachable(k, f"pose error {result.pose_error_norm:.4g}")
        q[k] = result.q
        if k > 0:
            dq = np.abs(q[k] - q[k - 1])
            if float(dq.max()) > jump_threshold:
                raise JointJump(k, float(dq.max()))
        seed = result.q

    times = schedule.times
    qd = np.zeros_like(q)
    if n > 1:
        qd[0] = (q[1] - q[0]) / (times[1] - times[0])
        qd[-1] = (q[-1] - q[-2]) / (times[-1] - times[-2])
        if n > 2:
            dt = (times[2:] - times[:-2])[:, None]
            qd[1:-1] = (q[2:] - q[:-2]) / dt

    limits = model.velocity_limits
    breach = np.abs(qd) > limits[None, :] + 1e-9
    if np.any(breach):
        idx, joint = np.argwhere(breach)[0]
        raise VelocityLimitExceeded(
            int(idx), int(joint), float(qd[idx, joint]), float(limits[joint])
        )
    return JointTrajectory(times=times, q=q, qd=qd, model_name=model.name)


def validate_trajectory(
    traj: JointTrajectory,
    model: RobotModel,
    zones=(),
    accel_bound: float = DEFAULT_ACCEL_BOUND,
) -> ValidationReport:
    """Pure check of a finished trajectory; violations are data, not errors.

    Flags per-joint velocity breaches, finite-difference accelerations above
    the configured bound, and tool positions (via FK) inside any protection
    zone. Zones use their own margin only: the tool is the point of interest.
    """
    violations = []
    limits = model.velocity_limits
    for idx, joint in np.argwhere(np.abs(traj.qd) > limits[None, :] + 1e-9):
        violations.append(
            Violation(
                kind="velocity",
                index=int(idx),
                joint=int(joint),
                detail=(
                    f"|qd[{joint}]| = {abs(traj.qd[idx, joint]):.3f} rad/s "
                    f"exceeds {limits[joint]:.3f}"
                ),
            )
        )

    if len(traj) > 1:
        dt = np.diff(traj.times)[:, None]
        accel = np.diff(traj.qd, axis=0) / dt
        for idx, joint in np.argwhere(np.abs(accel) > accel_bound + 1e-9):
            violations.append(
                Violation(
                    kind="acceleration",
                    index=int(idx),
                    joint=int(joint),
                    detail=(
                        f"|qdd[{joint}]| = {abs(accel[idx, joint]):.3f} rad/s^2 "
                        f"exceeds {accel_bound:.3f}"
                    ),
                )
            )

    if zones:
        tool_positions = np.array(
            [forward_kinematics(model, qk).position for qk in traj.q]
        )
        for zone in zones:
            hits = zone.contains(tool_positions)
            for idx in np.flatnonzero(hits):
                violations.append(
                    Violation(
                        kind="protection_zone",
                        index=int(idx),
                        zone_id=zone.id,
                        detail=f"tool enters protection zone {zone.id!r} at sample {idx}",
                    )
                )
    return ValidationReport(violations=tuple(violations))


def trajectory_to_dict(traj: JointTrajectory) -> dict:
    return {
        "schema": TRAJECTORY_SCHEMA,
        "model": traj.model_name,
        "times": traj.times.tolist(),
        "q": traj.q.tolist(),
        "qd": traj.qd.tolist(),
    }


def export_trajectory(traj: JointTrajectory) -> bytes:
    """Canonical byte encoding; identical trajectories export identically."""
    return json.dumps(
        trajectory_to_dict(traj), sort_keys=True, separators=(",", ":")
    ).encode()


def trajectory_from_dict(data: dict) -> JointTrajectory:
    if data.get("schema") != TRAJECTORY_SCHEMA:
        raise ValueError(f"unsupported trajectory schema: {data.get('schema')!r}")
    return JointTrajectory(
        times=np.asarray(data["times"], dtype=float),
        q=np.asarray(data["q"], dtype=float),
        qd=np.asarray(data["qd"], dtype=float),
        model_name=str(data.get("model", "unknown")),
    )
