"""Workspace RRT* with obstacle avoidance, looped candidate generation,
cubic-spline uniform resampling, and cosine time reparameterization.

Planning happens in the tool's 3D Cartesian workspace; the gripper is a
point inflated by a configurable radius folded into every obstacle check.
Obstacles are closed sets: boundary contact counts as a collision.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.interpolate import CubicSpline

from .se3 import Quaternion


class StartInCollision(ValueError):
    pass


class GoalInCollision(ValueError):
    pass


class PlanningFailed(RuntimeError):
    """Iteration budget exhausted without connecting to the goal region."""


class AllRunsFailed(RuntimeError):
    """Every candidate run failed; per-run reasons attached."""

    def __init__(self, failures):
        super().__init__("; ".join(f"run {f.run}: {f.reason}" for f in failures))
        self.failures = failures


class ResampleCollision(RuntimeError):
    """Spline-resampled path intersects an obstacle the polyline avoided."""


class DegeneratePath(ValueError):
    pass


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    half_extents: np.ndarray
    orientation: Quaternion = field(default_factory=Quaternion.identity)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(
            self, "half_extents", np.asarray(self.half_extents, dtype=float).reshape(3)
        )
        if np.any(self.half_extents <= 0):
            raise ValueError("box half-extents must be positive")


@dataclass(frozen=True)
class Obstacle:
    id: str
    shape: Sphere | Box
    margin: float = 0.0

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("obstacle margin must be non-negative")

    def contains(self, points: np.ndarray, inflation: float = 0.0) -> np.ndarray:
        """Closed containment test for an (N, 3) array of points."""
        points = np.atleast_2d(points)
        pad = self.margin + inflation
        if isinstance(self.shape, Sphere):
            r = self.shape.radius + pad
            d2 = np.sum((points - self.shape.center) ** 2, axis=1)
            return d2 <= r * r
        local = (points - self.shape.center) @ self.shape.orientation.to_rotation_matrix()
        return np.all(np.abs(local) <= self.shape.half_extents + pad, axis=1)


@dataclass(frozen=True)
class Workspace:
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    obstacles: tuple = ()

    def __post_init__(self):
        lo = np.asarray(self.bounds_min, dtype=float).reshape(3)
        hi = np.asarray(self.bounds_max, dtype=float).reshape(3)
        if np.any(lo >= hi):
            raise ValueError("workspace bounds must satisfy min < max per axis")
        object.__setattr__(self, "bounds_min", lo)
        object.__setattr__(self, "bounds_max", hi)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def volume(self) -> float:
        return float(np.prod(self.bounds_max - self.bounds_min))

    def in_bounds(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all(
            (points >= self.bounds_min) & (points <= self.bounds_max), axis=1
        )

    def points_free(self, points: np.ndarray, inflation: float = 0.0) -> np.ndarray:
        """True per point when inside bounds and outside every inflated obstacle."""
        points = np.atleast_2d(points)
        free = self.in_bounds(points)
        for obstacle in self.obstacles:
            free &= ~obstacle.contains(points, inflation)
        return free


@dataclass(frozen=True)
class PlannerSettings:
    max_iterations: int = 4000
    step: float = 0.05
    goal_bias: float = 0.05
    goal_radius: float = 0.02
    neighbor_gamma: float | None = None   # derived from workspace volume if None
    neighbor_radius_max: float = 0.25
    collision_resolution: float = 0.01
    inflation: float = 0.05               # gripper radius folded into checks
    k: int = 4
    base_seed: int = 1
    m: int = 100                          # uniform vertices after resampling
    n_t: int = 100                        # timed samples after reparameterization

    def validate(self) -> "PlannerSettings":
        if self.max_iterations < 1 or self.k < 1:
            raise ValueError("iteration and candidate counts must be positive")
        if min(self.step, self.goal_radius, self.collision_resolution) <= 0:
            raise ValueError("step, goal_radius and resolution must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.inflation < 0:
            raise ValueError("inflation must be non-negative")
        if self.m < 2 or self.n_t < 2:
            raise ValueError("m and n_t must be at least 2")
        return self

    def gamma_for(self, ws: Workspace) -> float:
        if self.neighbor_gamma is not None:
            return self.neighbor_gamma
        # Asymptotic-optimality bound for d=3 with the bounds volume as the
        # free-space proxy, widened 1.5x for finite-sample behavior.
        mu = ws.volume()
        zeta = 4.0 * math.pi / 3.0
        return 1.5 * (2.0 * (1.0 + 1.0 / 3.0)) ** (1.0 / 3.0) * (mu / zeta) ** (1.0 / 3.0)


class PathStatus(Enum):
    PROPOSED = "proposed"
    SELECTED = "selected"
    DISCARDED = "discarded"
    EXECUTED = "executed"


@dataclass
class CandidatePath:
    id: int
    waypoints: np.ndarray
    cost: float
    seed: int
    status: PathStatus = PathStatus.PROPOSED

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 3)


@dataclass(frozen=True)
class PlanFailure:
    run: int
    reason: str


@dataclass(frozen=True)
class CandidateBatch:
    paths: list
    failures: list


def polyline_length(points: np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def segment_free(
    a,
    b,
    ws: Workspace,
    resolution: float = 0.01,
    inflation: float = 0.0,
) -> bool:
    """True iff every sample along [a, b] at the given resolution is free."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    count = max(2, int(math.ceil(length / resolution)) + 1)
    ts = np.linspace(0.0, 1.0, count)
    samples = a[None, :] + ts[:, None] * (b - a)[None, :]
    return bool(np.all(ws.points_free(samples, inflation)))


def _polyline_free(points: np.ndarray, ws: Workspace, resolution, inflation) -> bool:
    for i in range(len(points) - 1):
        if not segment_free(points[i], points[i + 1], ws, resolution, inflation):
            return False
    return True


@dataclass
class _TreeView:
    """Read-only snapshot handed to the audit hook after each insertion."""

    positions: np.ndarray
    parents: np.ndarray
    costs: np.ndarray
    size: int
    best_goal_cost: float


def plan_rrt_star(
    start,
    goal,
    ws: Workspace,
    params: PlannerSettings | None = None,
    seed: int = 0,
    audit_hook=None,
) -> CandidatePath:
    """Single seeded RRT* run from start into the goal region.

    Implements both optimality steps: choose-parent over the neighbor ball
    and rewire-neighbors with cost propagation to descendants. Deterministic
    for a given seed. The returned path ends exactly at the goal point.
    """
    params = (params or PlannerSettings()).validate()
    start = np.asarray(start, dtype=float).reshape(3)
    goal = np.asarray(goal, dtype=float).reshape(3)
    if not bool(ws.points_free(start, params.inflation)[0]):
        raise StartInCollision(f"start {start.tolist()} is not in free space")
    if not bool(ws.points_free(goal, params.inflation)[0]):
        raise GoalInCollision(f"goal {goal.tolist()} is not in free space")

    rng = np.random.default_rng(seed)
    cap = params.max_iterations + 1
    positions = np.empty((cap, 3))
    parents = np.full(cap, -1, dtype=np.int64)
    costs = np.empty(cap)
    children: list[list[int]] = [[] for _ in range(cap)]
    positions[0] = start
    costs[0] = 0.0
    n = 1

    gamma = params.gamma_for(ws)
    resolution = params.collision_resolution
    inflation = params.inflation
    # Nodes with a verified collision-free edge into the goal point.
    goal_links: dict[int, float] = {}

    def best_goal_cost() -> float:
        if not goal_links:
            return math.inf
        return min(costs[j] + edge for j, edge in goal_links.items())

    def propagate(root_idx: int, delta: float) -> None:
        stack = [root_idx]
        while stack:
            node = stack.pop()
            for child in children[node]:
                costs[child] -= delta
                stack.append(child)

    for _ in range(params.max_iterations):
        if rng.random() < params.goal_bias:
            x_rand = goal
        else:
            x_rand = rng.uniform(ws.bounds_min, ws.bounds_max)

        diffs = positions[:n] - x_rand
        d2 = np.einsum("ij,ij->i", diffs, diffs)
        nearest = int(np.argmin(d2))
        dist_nearest = math.sqrt(float(d2[nearest]))
        if dist_nearest < 1e-12:
            continue
        if dist_nearest <= params.step:
            x_new = x_rand
        else:
            x_new = positions[nearest] + (params.step / dist_nearest) * (
                x_rand - positions[nearest]
            )
        if not segment_free(positions[nearest], x_new, ws, resolution, inflation):
            continue

        radius = min(
            params.neighbor_radius_max,
            gamma * (math.log(n + 1) / (n + 1)) ** (1.0 / 3.0),
        )
        diffs_new = positions[:n] - x_new
        d2_new = np.einsum("ij,ij->i", diffs_new, diffs_new)
        neighbor_idx = np.flatnonzero(d2_new <= radius * radius)

        # Choose parent: cheapest connectable neighbor; the nearest node is
        # already verified and serves as the fallback.
        dists_new = np.sqrt(d2_new[neighbor_idx])
        order = np.argsort(costs[neighbor_idx] + dists_new, kind="stable")
        parent = nearest
        parent_dist = math.sqrt(float(d2_new[nearest]))
        best_cost = costs[nearest] + parent_dist
        for k in order:
            j = int(neighbor_idx[k])
            candidate_cost = costs[j] + float(dists_new[k])
            if candidate_cost >= best_cost - 1e-12:
                break
            if j == nearest or segment_free(positions[j], x_new, ws, resolution, inflation):
                parent = j
                parent_dist = float(dists_new[k])
                best_cost = candidate_cost
                break

        node = n
        positions[node] = x_new
        parents[node] = parent
        costs[node] = best_cost
        children[parent].append(node)
        n += 1

        # Rewire: route neighbors through the new node when cheaper.
        for k, j in enumerate(neighbor_idx):
            j = int(j)
            if j == parent:
                continue
            alt = best_cost + float(dists_new[k])
            if alt + 1e-12 >= costs[j]:
                continue
            if not segment_free(x_new, positions[j], ws, resolution, inflation):
                continue
            children[parents[j]].remove(j)
            parents[j] = node
            children[node].append(j)
            delta = costs[j] - alt
            costs[j] = alt
            propagate(j, delta)

        goal_gap = float(np.linalg.norm(goal - x_new))
        if goal_gap <= params.goal_radius and node not in goal_links:
            if goal_gap < 1e-12 or segment_free(x_new, goal, ws, resolution, inflation):
                goal_links[node] = goal_gap

        if audit_hook is not None:
            audit_hook(
                _TreeView(
                    positions=positions[:n],
                    parents=parents[:n],
                    costs=costs[:n],
                    size=n,
                    best_goal_cost=best_goal_cost(),
                )
            )

    if not goal_links:
        raise PlanningFailed(
            f"no path to goal after {params.max_iterations} iterations (seed {seed})"
        )
    tail = min(goal_links, key=lambda j: (costs[j] + goal_links[j], j))
    chain = [tail]
    while parents[chain[-1]] != -1:
        chain.append(int(parents[chain[-1]]))
    chain.reverse()
    waypoints = [positions[j] for j in chain]
    if float(np.linalg.norm(waypoints[-1] - goal)) > 1e-12:
        waypoints.append(goal)
    waypoints = np.array(waypoints)
    return CandidatePath(
        id=0,
        waypoints=waypoints,
        cost=polyline_length(waypoints),
        seed=seed,
    )


def generate_candidates(
    start,
    goal,
    ws: Workspace,
    params: PlannerSettings | None = None,
    base_seed: int | None = None,
    K: int | None = None,
    workers: int | None = None,
) -> CandidateBatch:
    """K independent RRT* runs with seeds base_seed + i.

    Runs execute concurrently on a thread pool; each owns its private seeded
    random stream, and results are collected by run index so the output
    order (and content) is independent of completion order. Failed runs are
    reported, not fatal, unless every run fails.
    """
    params = (params or PlannerSettings()).validate()
    if base_seed is None:
        base_seed = params.base_seed
    if K is None:
        K = params.k
    if K < 1:
        raise ValueError("K must be at least 1")

    def run_one(i: int):
        path = plan_rrt_star(start, goal, ws, params, seed=base_seed + i)
        path.id = i
        return path

    results: list = [None] * K
    errors: list = [None] * K
    max_workers = workers or min(K, 4)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {pool.submit(run_one, i): i for i in range(K)}
        for future, i in futures.items():
            try:
                results[i] = future.result()
            except (StartInCollision, GoalInCollision, PlanningFailed) as exc:
                errors[i] = f"{type(exc).__name__}: {exc}"

    paths = [p for p in results if p is not None]
    failures = [PlanFailure(run=i, reason=msg) for i, msg in enumerate(errors) if msg]
    if not paths:
        raise AllRunsFailed(failures)
    return CandidateBatch(paths=paths, failures=failures)


def _dedupe_consecutive(points: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(points)):
        if np.linalg.norm(points[i] - points[keep[-1]]) > 1e-12:
            keep.append(i)
    return points[keep]


def resample_uniform(
    path: CandidatePath,
    M: int,
    ws: Workspace | None = None,
    resolution: float = 0.01,
    inflation: float = 0.0,
) -> CandidatePath:
    """Cubic-spline the waypoints and re-sample to M arc-length-uniform vertices.

    The spline is a natural cubic, chord-length parameterized. Endpoints are
    preserved exactly. When a workspace is given, the resampled polyline is
    re-checked for collisions (the spline can cut corners the raw path
    cleared) and ResampleCollision is raised on a hit.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    points = _dedupe_consecutive(np.asarray(path.waypoints, dtype=float).reshape(-1, 3))
    if len(points) < 2:
        raise DegeneratePath("path has zero length")

    chord = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))]
    )
    if len(points) == 2:
        # Two points define a segment; the natural spline is the line itself.
        ts = np.linspace(0.0, 1.0, M)[:, None]
        resampled = points[0] + ts * (points[1] - points[0])
    else:
        spline = CubicSpline(chord, points, axis=0, bc_type="natural")
        dense_n = max(10_000, 50 * M)
        dense_u = np.linspace(chord[0], chord[-1], dense_n)
        dense_pts = spline(dense_u)
        arc = np.concatenate(
            [[0.0], np.cumsum(np.linalg.norm(np.diff(dense_pts, axis=0), axis=1))]
        )
        targets = np.linspace(0.0, arc[-1], M)
        u_at = np.interp(targets, arc, dense_u)
        resampled = spline(u_at)
    resampled[0] = points[0]
    resampled[-1] = points[-1]

    if ws is not None and not _polyline_free(resampled, ws, resolution, inflation):
        raise ResampleCollision(
            f"path {path.id}: spline-resampled segments intersect an obstacle"
        )
    return replace(
        path, waypoints=resampled, cost=polyline_length(resampled)
    )


def cosine_fraction(s):
    """Boundary-smoothing map: arc fraction 0.5 - 0.5 cos(pi s) for s in [0, 1]."""
    return 0.5 - 0.5 * np.cos(np.pi * np.asarray(s, dtype=float))


def cosine_reparameterize(v_u: np.ndarray, n_t: int) -> np.ndarray:
    """Emit n_t points along the polyline at cosine-spaced arc fractions.

    For s_k = k/(n_t - 1) the k-th output sits at normalized arc length
    0.5 - 0.5 cos(pi s_k), giving zero velocity and maximum acceleration at
    the boundaries once samples are played back on a uniform clock.
    """
    if n_t < 2:
        raise ValueError("n_t must be at least 2")
    points = np.asarray(v_u, dtype=float).reshape(-1, 3)
    if len(points) < 2:
        raise DegeneratePath("need at least two vertices")
    arc = np.concatenate(
        [[0.0], np.cumsum(np.linalg.norm(np.diff(points, axis=0), axis=1))]
    )
    total = arc[-1]
    fractions = cosine_fraction(np.linspace(0.0, 1.0, n_t))
    if total <= 0.0:
        out = np.repeat(points[:1], n_t, axis=0)
    else:
        out = np.column_stack(
            [np.interp(fractions * total, arc, points[:, dim]) for dim in range(3)]
        )
    out[0] = points[0]
    out[-1] = points[-1]
    return out
