"""Serial-chain kinematics: model loading, forward kinematics, Jacobian, sampling.

Kinematic parameters are configuration, not code: they come from a JSON
model file (a Gen3-like 7-DOF default ships with the package). Joints are
revolute only; each joint rotates about its local axis after the fixed
origin transform of its link.

Model file schema (``holoplan-robot/1``)::

    {
      "schema": "holoplan-robot/1",
      "name": "<model name>",
      "joints": [
        {"axis": [x, y, z],
         "origin": {"xyz": [x, y, z], "rpy": [roll, pitch, yaw]},
         "limits": {"lower": rad, "upper": rad, "velocity": rad_per_s}},
        ...
      ],
      "tool_offset": {"xyz": [...], "rpy": [...]},
      "home": [q1, ..., qn]          # optional, defaults to limit midpoints
    }

``rpy`` is fixed-axis roll/pitch/yaw (R = Rz * Ry * Rx). ``velocity`` may be
omitted and defaults to 1.0 rad/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .se3 import Pose, Quaternion, Transform

DEFAULT_VELOCITY_LIMIT = 1.0  # rad/s, used when the model file gives none

MODEL_SCHEMA = "holoplan-robot/1"


class ModelError(ValueError):
    """Model file is malformed or kinematically degenerate."""


class DimensionMismatch(ValueError):
    """Joint vector length does not match the model."""


def rpy_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Fixed-axis roll/pitch/yaw rotation, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


@dataclass(frozen=True)
class JointSpec:
    axis: np.ndarray          # unit axis in the joint's local frame
    origin: Transform         # fixed link transform preceding the joint
    lower: float
    upper: float
    velocity: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        norm = float(np.linalg.norm(axis))
        if norm < 1e-12:
            raise ModelError("joint axis must be nonzero")
        object.__setattr__(self, "axis", axis / norm)
        if not self.lower < self.upper:
            if not (self.lower == self.upper):  # allow frozen joints in tests
                raise ModelError("joint limits must satisfy lower <= upper")


@dataclass(frozen=True)
class RobotModel:
    """Immutable revolute serial chain; safe to share across threads."""

    name: str
    joints: tuple
    tool_offset: Transform
    home: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "home", np.asarray(self.home, dtype=float).reshape(self.dof)
        )

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])

    @property
    def velocity_limits(self) -> np.ndarray:
        return np.array([j.velocity for j in self.joints])

    def reach(self) -> float:
        """Upper bound on tool distance from base: summed link lengths."""
        total = sum(float(np.linalg.norm(j.origin.translation)) for j in self.joints)
        return total + float(np.linalg.norm(self.tool_offset.translation))

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise DimensionMismatch(
                f"expected {self.dof} joint angles, got shape {q.shape}"
            )
        return q

    def clamp(self, q) -> np.ndarray:
        return np.clip(self.check_q(q), self.lower_limits, self.upper_limits)

    def within_limits(self, q, tol: float = 1e-12) -> bool:
        q = self.check_q(q)
        return bool(
            np.all(q >= self.lower_limits - tol) and np.all(q <= self.upper_limits + tol)
        )


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


def _chain_frames(model: RobotModel, q: np.ndarray):
    """Walk the chain, yielding (joint origin position, world axis) per joint
    and finally the tool rotation/position."""
    r = np.eye(3)
    p = np.zeros(3)
    origins = []
    axes = []
    for spec, angle in zip(model.joints, q):
        # Fixed link transform first...
        p = r @ spec.origin.translation + p
        r = r @ spec.origin.rotation
        origins.append(p)
        axes.append(r @ spec.axis)
        # ...then the joint's own rotation about its local axis.
        r = r @ _axis_rotation(spec.axis, float(angle))
    p = r @ model.tool_offset.translation + p
    r = r @ model.tool_offset.rotation
    return origins, axes, r, p


def forward_kinematics(model: RobotModel, q) -> Pose:
    """Tool pose in the robot base frame."""
    q = model.check_q(q)
    _, _, r, p = _chain_frames(model, q)
    return Pose(p, Quaternion.from_rotation_matrix(r))


def jacobian(model: RobotModel, q) -> np.ndarray:
    """Geometric Jacobian, 6 x dof: rows 0-2 linear (m/s), rows 3-5 angular."""
    q = model.check_q(q)
    origins, axes, _, p_tool = _chain_frames(model, q)
    jac = np.zeros((6, model.dof))
    for i in range(model.dof):
        z = axes[i]
        jac[:3, i] = np.cross(z, p_tool - origins[i])
        jac[3:, i] = z
    return jac


def sample_configuration(model: RobotModel, rng_seed: int) -> np.ndarray:
    """Uniform in-limit joint vector, deterministic per seed."""
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(model.lower_limits, model.upper_limits)


def _transform_from_origin(origin: dict) -> Transform:
    xyz = origin.get("xyz", [0.0, 0.0, 0.0])
    rpy = origin.get("rpy", [0.0, 0.0, 0.0])
    return Transform(rpy_matrix(*rpy), xyz)


def model_from_dict(data: dict) -> RobotModel:
    if data.get("schema") != MODEL_SCHEMA:
        raise ModelError(f"unsupported robot model schema: {data.get('schema')!r}")
    raw_joints = data.get("joints")
    if not raw_joints:
        raise ModelError("model file has no joints")
    joints = []
    for i, item in enumerate(raw_joints):
        try:
            limits = item.get("limits", {})
            joints.append(
                JointSpec(
                    axis=item["axis"],
                    origin=_transform_from_origin(item.get("origin", {})),
                    lower=float(limits["lower"]),
                    upper=float(limits["upper"]),
                    velocity=float(limits.get("velocity", DEFAULT_VELOCITY_LIMIT)),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ModelError(f"joint {i} is malformed: {exc}") from exc
    tool = _transform_from_origin(data.get("tool_offset", {}))
    home = data.get("home")
    if home is None:
        home = [(j.lower + j.upper) / 2.0 for j in joints]
    if len(home) != len(joints):
        raise ModelError("home configuration length does not match joint count")
    model = RobotModel(
        name=str(data.get("name", "unnamed")),
        joints=tuple(joints),
        tool_offset=tool,
        home=np.asarray(home, dtype=float),
    )
    if not model.within_limits(model.home):
        raise ModelError("home configuration violates joint limits")
    return model


def load_robot_model(ref: str) -> RobotModel:
    """Load a model by packaged name (e.g. ``gen3_like``) or file path."""
    path = Path(ref)
    if path.suffix == ".json" and path.exists():
        text = path.read_text()
    else:
        try:
            text = (
                resources.files("holoplan") / "models" / f"{ref}.json"
            ).read_text()
        except FileNotFoundError:
            raise ModelError(f"unknown robot model reference: {ref!r}") from None
    return model_from_dict(json.loads(text))
