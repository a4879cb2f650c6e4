"""Iterative inverse kinematics: damped least-squares descent on squared pose error.

The objective is the squared Euclidean norm of a 6-element twist error
(position difference plus axis-angle of the relative rotation), minimized
under joint limits. Each iteration solves a damped Gauss-Newton (quasi-Newton)
subproblem in the coordinates that are free to move, clamping the iterate to
the limit box:

- joints pinned at a bound with the step pushing outward are frozen out of
  the subproblem (clipping a full step otherwise wrecks the direction);
- joints whose limit span covers a full turn are treated as periodic: moving
  a pinned value by 2*pi is an exact pose-space no-op, so the bound never
  binds for them;
- when damping saturates without an acceptable step, the solver jumps to the
  best of a fixed family of branch candidates (pi-shifted periodic joints,
  midpoint-reflected limited ones) before giving up - redundant arms stall in
  branch minima far more often than in true dead ends.

Local-minimum detection (stationary projected gradient, exhausted damping
after the escape budget, or stagnation) triggers random restarts from
sample_configuration up to a configured count; the best attempt is returned
and is never worse than the seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .robot import RobotModel, forward_kinematics, jacobian, sample_configuration
from .se3 import Pose

TWO_PI = 2.0 * np.pi
LAMBDA_INIT = 1e-3
LAMBDA_MIN = 1e-9
LAMBDA_GROWTH = 4.0
LAMBDA_SHRINK = 3.0
MAX_DAMPING_TRIES = 14


class InvalidConfig(ValueError):
    """Solver settings are unusable (non-positive tolerances, etc.)."""


class IkStatus(Enum):
    CONVERGED = "converged"
    LOCAL_MINIMUM = "local_minimum"
    UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class IkConfig:
    tolerance: float = 1e-4            # combined m-rad norm for convergence
    gradient_tolerance: float = 1e-8   # projected-gradient stationarity level
    stagnation_window: int = 20        # accepted steps without improvement
    max_iterations: int = 400
    max_restarts: int = 10
    restart_seed: int = 0
    unreachable_threshold: float = 1e-2
    max_escapes: int = 4               # branch jumps per attempt before restarting

    def validate(self) -> "IkConfig":
        if self.tolerance <= 0 or self.gradient_tolerance <= 0:
            raise InvalidConfig("tolerances must be positive")
        if self.unreachable_threshold <= 0:
            raise InvalidConfig("unreachable threshold must be positive")
        if self.max_iterations < 1 or self.max_restarts < 0 or self.max_escapes < 0:
            raise InvalidConfig("iteration/restart budgets must be non-negative")
        if self.stagnation_window < 1:
            raise InvalidConfig("stagnation window must be at least 1")
        return self


@dataclass(frozen=True)
class PoseError:
    """6-vector twist error: position (m) then axis-angle orientation (rad)."""

    twist: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "twist", np.asarray(self.twist, dtype=float).reshape(6)
        )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.twist))


@dataclass(frozen=True)
class IkResult:
    q: np.ndarray
    pose_error_norm: float
    restarts_used: int
    status: IkStatus
    iterations: int = 0


@dataclass(frozen=True)
class ReachabilityNotice:
    code: str
    message: str


def pose_error(current: Pose, desired: Pose) -> PoseError:
    """Twist from current to desired: position delta + shortest-arc axis-angle."""
    rel = desired.orientation * current.orientation.conjugate()
    return PoseError(
        np.concatenate(
            [desired.position - current.position, rel.to_rotation_vector()]
        )
    )


def _objective(model: RobotModel, target: Pose, q: np.ndarray):
    err = pose_error(forward_kinematics(model, q), target).twist
    return err, float(err @ err)


class _Attempt:
    """One descent attempt; holds the limit geometry shared across iterations."""

    def __init__(self, model: RobotModel, target: Pose, cfg: IkConfig):
        self.model = model
        self.target = target
        self.cfg = cfg
        self.lo = model.lower_limits
        self.hi = model.upper_limits
        # A full-turn limit span makes the joint effectively periodic.
        self.periodic = (self.hi - self.lo) >= TWO_PI - 1e-9

    def _branch_jump(self, q: np.ndarray, i: int) -> None:
        if self.periodic[i]:
            q[i] = q[i] - np.pi if q[i] > 0 else q[i] + np.pi
        else:
            q[i] = (self.lo[i] + self.hi[i]) - q[i]

    def _escape_candidates(self, q: np.ndarray):
        n = self.model.dof
        for r in (1, 2):
            for subset in itertools.combinations(range(n), r):
                cand = q.copy()
                for i in subset:
                    self._branch_jump(cand, i)
                yield np.clip(cand, self.lo, self.hi)

    def _descend(self, q, err, f, budget, trace):
        """Damped-least-squares loop until convergence, stall, or budget end.

        Returns (q, err, f, converged, stalled, iterations_used).
        """
        cfg = self.cfg
        lo, hi = self.lo, self.hi
        tol_sq = cfg.tolerance * cfg.tolerance
        lam = LAMBDA_INIT
        best_norm = float(np.sqrt(f))
        since_improvement = 0
        it = 0
        while it < budget:
            it += 1
            if trace is not None:
                trace.append((q.copy(), f))
            if f <= tol_sq:
                return q, err, f, True, False, it

            jac = jacobian(self.model, q)
            grad = -2.0 * (jac.T @ err)

            # Stationarity on the limit box (periodic joints never bind).
            projected = q - np.clip(q - grad, lo, hi)
            projected[self.periodic] = grad[self.periodic]
            if float(np.linalg.norm(projected)) < cfg.gradient_tolerance:
                return q, err, f, False, True, it

            free = np.ones(self.model.dof, dtype=bool)
            for i in range(self.model.dof):
                if q[i] >= hi[i] - 1e-10 and grad[i] < 0.0:
                    if self.periodic[i]:
                        q[i] -= TWO_PI
                    else:
                        free[i] = False
                elif q[i] <= lo[i] + 1e-10 and grad[i] > 0.0:
                    if self.periodic[i]:
                        q[i] += TWO_PI
                    else:
                        free[i] = False

            jac_free = jac[:, free]
            gauss = jac_free.T @ jac_free
            rhs = jac_free.T @ err
            eye = np.eye(int(free.sum()))
            stepped = False
            for _ in range(MAX_DAMPING_TRIES):
                dq_free = np.linalg.solve(gauss + lam * eye, rhs)
                cand = q.copy()
                cand[free] += dq_free
                cand = np.clip(cand, lo, hi)
                err_new, f_new = _objective(self.model, self.target, cand)
                if f_new < f:
                    q, err, f = cand, err_new, f_new
                    lam = max(lam / LAMBDA_SHRINK, LAMBDA_MIN)
                    stepped = True
                    break
                lam *= LAMBDA_GROWTH
            if not stepped:
                return q, err, f, False, True, it

            norm = float(np.sqrt(f))
            if norm < best_norm - 1e-12:
                best_norm = norm
                since_improvement = 0
            else:
                since_improvement += 1
                if since_improvement >= cfg.stagnation_window:
                    return q, err, f, False, True, it
        return q, err, f, f <= tol_sq, False, it

    def run(self, q0: np.ndarray, trace=None):
        """Descend with branch-escape jumps. Returns (best_q, best_norm, converged, iters)."""
        q = np.clip(q0, self.lo, self.hi)
        err, f = _objective(self.model, self.target, q)
        best_q, best_f = q.copy(), f
        escapes_used = 0
        budget = self.cfg.max_iterations
        while True:
            q, err, f, converged, stalled, used = self._descend(q, err, f, budget, trace)
            budget -= used
            if f < best_f:
                best_q, best_f = q.copy(), f
            if converged or budget <= 0 or not stalled:
                break
            if escapes_used >= self.cfg.max_escapes:
                break
            cands = list(self._escape_candidates(q))
            scored = [(_objective(self.model, self.target, c)[1], k) for k, c in enumerate(cands)]
            _, k_best = min(scored)
            q = cands[k_best]
            err, f = _objective(self.model, self.target, q)
            escapes_used += 1
        total = self.cfg.max_iterations - budget
        return best_q, float(np.sqrt(best_f)), best_f <= self.cfg.tolerance**2, total


def solve_ik(
    model: RobotModel,
    target: Pose,
    seed_q,
    config: IkConfig | None = None,
    trace=None,
) -> IkResult:
    """Best-effort IK with local-minimum detection and random restarts.

    Deterministic for a fixed seed_q and restart_seed: restart k draws its
    configuration from sample_configuration(model, restart_seed + k + 1).
    """
    cfg = (config or IkConfig()).validate()
    seed_q = model.check_q(seed_q)

    best_q = model.clamp(seed_q)
    best_norm = pose_error(forward_kinematics(model, best_q), target).norm
    restarts_used = 0
    total_iters = 0

    attempt = _Attempt(model, target, cfg)
    start = best_q
    for round_idx in range(cfg.max_restarts + 1):
        q, norm, converged, iters = attempt.run(start, trace=trace)
        total_iters += iters
        if norm < best_norm:
            best_q, best_norm = q, norm
        if converged:
            return IkResult(
                q=best_q,
                pose_error_norm=best_norm,
                restarts_used=restarts_used,
                status=IkStatus.CONVERGED,
                iterations=total_iters,
            )
        if round_idx == cfg.max_restarts:
            break
        restarts_used += 1
        start = sample_configuration(model, cfg.restart_seed + round_idx + 1)

    status = (
        IkStatus.UNREACHABLE
        if best_norm > cfg.unreachable_threshold
        else IkStatus.LOCAL_MINIMUM
    )
    return IkResult(
        q=best_q,
        pose_error_norm=best_norm,
        restarts_used=restarts_used,
        status=status,
        iterations=total_iters,
    )


def classify_reachability(result: IkResult) -> ReachabilityNotice:
    """Operator-facing notice for an IK outcome."""
    if result.status is IkStatus.CONVERGED:
        return ReachabilityNotice("reachable", "target pose is reachable")
    if result.status is IkStatus.UNREACHABLE:
        return ReachabilityNotice(
            "unreachable", "unreachable: adjust start pose or move the target closer"
        )
    return ReachabilityNotice(
        "uncertain", "uncertain: retry with a different seed or move the target"
    )
