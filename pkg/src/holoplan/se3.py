"""Rigid-body math: quaternions, poses, transforms, frame mapping and calibration.

Conventions used throughout the package:

- Quaternions are scalar-first (w, x, y, z) and kept unit-norm.
- A Transform maps coordinates: ``apply`` takes a point expressed in the
  source frame and returns it expressed in the destination frame.
- Angles are radians, distances are meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Inputs may be off unit norm by this much before we reject them.
UNIT_INPUT_TOL = 1e-6
# Outputs that promise normalization are renormalized to this level.
UNIT_NORM_TOL = 1e-9
# Below this sin(angle), slerp falls back to normalized lerp.
SLERP_LERP_EPS = 1e-8


class InvalidRotation(ValueError):
    """Quaternion or rotation matrix is not a valid rotation."""


class UnregisteredFrame(KeyError):
    """No transform chain registered between the requested frames."""


class DegenerateCorrespondences(ValueError):
    """Too few or collinear point pairs; rigid fit is underdetermined."""


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, scalar-first. q and -q encode the same rotation."""

    w: float
    x: float
    y: float
    z: float

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis, angle: float) -> "Quaternion":
        axis = np.asarray(axis, dtype=float)
        norm = float(np.linalg.norm(axis))
        if norm == 0.0:
            if angle != 0.0:
                raise InvalidRotation("zero axis with nonzero angle")
            return Quaternion.identity()
        axis = axis / norm
        half = 0.5 * angle
        s = math.sin(half)
        return Quaternion(math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s)

    @staticmethod
    def from_rotation_matrix(r: np.ndarray) -> "Quaternion":
        r = np.asarray(r, dtype=float)
        if r.shape != (3, 3):
            raise InvalidRotation("rotation matrix must be 3x3")
        # Shepperd's method: pick the largest diagonal combination.
        tr = r[0, 0] + r[1, 1] + r[2, 2]
        if tr > 0.0:
            s = math.sqrt(tr + 1.0) * 2.0
            q = Quaternion(
                0.25 * s,
                (r[2, 1] - r[1, 2]) / s,
                (r[0, 2] - r[2, 0]) / s,
                (r[1, 0] - r[0, 1]) / s,
            )
        elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
            s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
            q = Quaternion(
                (r[2, 1] - r[1, 2]) / s,
                0.25 * s,
                (r[0, 1] + r[1, 0]) / s,
                (r[0, 2] + r[2, 0]) / s,
            )
        elif r[1, 1] >= r[2, 2]:
            s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
            q = Quaternion(
                (r[0, 2] - r[2, 0]) / s,
                (r[0, 1] + r[1, 0]) / s,
                0.25 * s,
                (r[1, 2] + r[2, 1]) / s,
            )
        else:
            s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
            q = Quaternion(
                (r[1, 0] - r[0, 1]) / s,
                (r[0, 2] + r[2, 0]) / s,
                (r[1, 2] + r[2, 1]) / s,
                0.25 * s,
            )
        return q.normalized()

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=float)

    def norm(self) -> float:
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0:
            raise InvalidRotation("cannot normalize zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def dot(self, other: "Quaternion") -> float:
        return (
            self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
        )

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def rotate(self, vec) -> np.ndarray:
        v = np.asarray(vec, dtype=float)
        qv = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(qv, v)
        return v + self.w * t + np.cross(qv, t)

    def to_rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def to_rotation_vector(self) -> np.ndarray:
        """Axis-angle 3-vector (axis * angle), shortest arc, angle in [0, pi]."""
        q = self if self.w >= 0.0 else -self
        v = np.array([q.x, q.y, q.z])
        s = float(np.linalg.norm(v))
        if s < 1e-12:
            # Small angle: sin(a/2) ~ a/2, so axis*angle ~ 2*v.
            return 2.0 * v
        angle = 2.0 * math.atan2(s, q.w)
        return v * (angle / s)

    def angle_to(self, other: "Quaternion") -> float:
        """Geodesic angle between the rotations (sign-insensitive), in [0, pi]."""
        rel = self.conjugate() * other
        # atan2 form stays accurate near zero where acos(dot) loses digits.
        s = math.sqrt(rel.x**2 + rel.y**2 + rel.z**2)
        return 2.0 * math.atan2(s, abs(rel.w))

    def require_unit(self, tol: float = UNIT_INPUT_TOL) -> "Quaternion":
        if abs(self.norm() - 1.0) > tol:
            raise InvalidRotation(f"quaternion norm {self.norm():.9f} is not unit")
        return self.normalized()


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position in meters plus unit-quaternion orientation."""

    position: np.ndarray
    orientation: Quaternion

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=float).reshape(3)
        )

    @staticmethod
    def from_parts(position, orientation: Quaternion) -> "Pose":
        return Pose(np.asarray(position, dtype=float), orientation.require_unit())

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (
            float(np.linalg.norm(self.position - other.position)) <= tol
            and self.orientation.angle_to(other.orientation) <= tol
        )


@dataclass(frozen=True)
class Transform:
    """Rigid map taking source-frame coordinates to destination-frame ones."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_quaternion(q: Quaternion, translation) -> "Transform":
        return Transform(q.require_unit().to_rotation_matrix(), translation)

    @staticmethod
    def from_translation(translation) -> "Transform":
        return Transform(np.eye(3), translation)

    def validate(self, tol: float = 1e-9) -> "Transform":
        if abs(float(np.linalg.det(self.rotation)) - 1.0) > tol:
            raise InvalidRotation("rotation determinant is not +1")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-8):
            raise InvalidRotation("rotation matrix is not orthonormal")
        return self

    def apply(self, point) -> np.ndarray:
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def apply_pose(self, pose: Pose) -> Pose:
        q = Quaternion.from_rotation_matrix(self.rotation)
        return Pose(self.apply(pose.position), (q * pose.orientation).normalized())

    def inverse(self) -> "Transform":
        rt = self.rotation.T
        return Transform(rt, -(rt @ self.translation))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Transform":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("expected 4x4 homogeneous matrix")
        return Transform(m[:3, :3], m[:3, 3])


def compose(a: Transform, b: Transform) -> Transform:
    """Homogeneous composition: the result applies b first, then a."""
    return Transform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


class FrameId(Enum):
    WORLD = "world"
    ROBOT_BASE = "robot_base"
    HOLOGRAM = "hologram"
    TOOL = "tool"


@dataclass
class FrameRegistry:
    """Directed transform edges between frames; mapping routes through chains."""

    _edges: dict = field(default_factory=dict)

    def register(self, src: FrameId, dst: FrameId, transform: Transform) -> None:
        """Register a transform taking src-frame coordinates into dst."""
        self._edges[(src, dst)] = transform.validate(tol=1e-6)

    def resolve(self, src: FrameId, dst: FrameId) -> Transform:
        """Chain registered edges (inverses allowed) from src to dst."""
        if src == dst:
            return Transform.identity()
        # BFS over frames; edge set is tiny (4 frames), so this is cheap.
        frontier = [(src, Transform.identity())]
        seen = {src}
        while frontier:
            frame, acc = frontier.pop(0)
            for (a, b), t in self._edges.items():
                step = None
                nxt = None
                if a == frame and b not in seen:
                    step, nxt = t, b
                elif b == frame and a not in seen:
                    step, nxt = t.inverse(), a
                if step is None:
                    continue
                chained = compose(step, acc)
                if nxt == dst:
                    return chained
                seen.add(nxt)
                frontier.append((nxt, chained))
        raise UnregisteredFrame(f"no transform chain from {src} to {dst}")


def map_pose(p: Pose, src: FrameId, dst: FrameId, registry: FrameRegistry) -> Pose:
    """Re-express a pose in another frame via the registered chain."""
    return registry.resolve(src, dst).apply_pose(p)


def slerp(q1: Quaternion, q2: Quaternion, t: float) -> Quaternion:
    """Geodesic interpolation between unit quaternions, shortest arc.

    Follows the classic sin-weighted form; when the quaternions are nearly
    parallel (sin of the separation angle below SLERP_LERP_EPS) it degrades
    to normalized linear interpolation to avoid dividing by ~0.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"interpolation parameter t={t} outside [0, 1]")
    q1 = q1.require_unit()
    q2 = q2.require_unit()

    d = q1.dot(q2)
    if d < 0.0:
        q2 = -q2
        d = -d
    d = min(1.0, d)
    omega = math.acos(d)
    so = math.sin(omega)
    if so < SLERP_LERP_EPS:
        a, b = 1.0 - t, t
    else:
        a = math.sin((1.0 - t) * omega) / so
        b = math.sin(t * omega) / so
    out = Quaternion(
        a * q1.w + b * q2.w,
        a * q1.x + b * q2.x,
        a * q1.y + b * q2.y,
        a * q1.z + b * q2.z,
    )
    return out.normalized()


def align_frames(points_world, points_base) -> Transform:
    """Least-squares rigid fit (no scale) sending world points onto base points.

    Standard Kabsch solution over >=3 non-collinear correspondences; the
    returned transform maps world-frame coordinates into the base frame.
    """
    pw = np.asarray(points_world, dtype=float)
    pb = np.asarray(points_base, dtype=float)
    if pw.ndim != 2 or pw.shape[1] != 3 or pw.shape != pb.shape:
        raise DegenerateCorrespondences("point sets must be matching Nx3 arrays")
    if pw.shape[0] < 3:
        raise DegenerateCorrespondences("need at least 3 correspondences")

    cw = pw.mean(axis=0)
    cb = pb.mean(axis=0)
    aw = pw - cw
    ab = pb - cb
    # Collinear sets leave the fit free to spin about the line.
    if np.linalg.svd(aw, compute_uv=False)[1] < 1e-10:
        raise DegenerateCorrespondences("correspondences are collinear")

    h = aw.T @ ab
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return Transform(r, cb - r @ cw)
