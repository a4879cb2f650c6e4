"""Session management and plan orchestration across the engine modules.

A session walks Idle -> Planning -> AwaitingSelection -> Executing -> Done,
with Fault reachable from anywhere. Scene edits are allowed while Idle or
AwaitingSelection (an edit discards candidates and returns to Idle for a
replan). Every mutation happens under the session lock: one writer, many
readers. Push messages (candidates, selection events, execution frames,
notices) carry the session id and a per-session monotone sequence number so
unordered consumers can re-order them.
"""

from __future__ import annotations

import itertools
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .ik import IkConfig, IkStatus, classify_reachability, solve_ik
from .planning import (
    AllRunsFailed,
    CandidatePath,
    GoalInCollision,
    PathStatus,
    PlanFailure,
    PlanningFailed,
    ResampleCollision,
    StartInCollision,
    Workspace,
    cosine_reparameterize,
    plan_rrt_star,
    resample_uniform,
    segment_free,
)
from .robot import RobotModel, forward_kinematics, load_robot_model
from .scene import Scene
from .se3 import FrameId, FrameRegistry, Pose, Quaternion, map_pose
from .selection import (
    CandidateSet,
    MarkerUpdate,
    NotSelected,
    apply_updates_and_detect,
    confirm_selection,
)
from .trajectory import (
    JointJump,
    JointTrajectory,
    VelocityLimitExceeded,
    WaypointUnreachable,
    build_joint_trajectory,
    build_tool_schedule,
    export_trajectory,
    validate_trajectory,
)


class SessionState(Enum):
    IDLE = "idle"
    PLANNING = "planning"
    AWAITING_SELECTION = "awaiting_selection"
    EXECUTING = "executing"
    DONE = "done"
    FAULT = "fault"


_FORWARD = {
    (SessionState.IDLE, SessionState.PLANNING),
    (SessionState.PLANNING, SessionState.AWAITING_SELECTION),
    # A failed plan or a scene edit returns the session to Idle for a replan.
    (SessionState.PLANNING, SessionState.IDLE),
    (SessionState.AWAITING_SELECTION, SessionState.IDLE),
    (SessionState.AWAITING_SELECTION, SessionState.EXECUTING),
    (SessionState.EXECUTING, SessionState.DONE),
}
LEGAL_TRANSITIONS = _FORWARD | {(s, SessionState.FAULT) for s in SessionState}


class InvalidState(RuntimeError):
    pass


class UnknownSession(KeyError):
    pass


class ValidationFailed(RuntimeError):
    def __init__(self, report):
        super().__init__(
            "trajectory validation failed: "
            + "; ".join(v.detail for v in report.violations[:5])
        )
        self.report = report


class OrderRejected(RuntimeError):
    """Confirmed markers no longer clear the obstacles."""


@dataclass(frozen=True)
class EndpointAdvisory:
    start: str
    end: str


@dataclass
class Session:
    id: str
    state: SessionState = SessionState.IDLE
    scene: Scene | None = None
    model: RobotModel | None = None
    candidate_set: CandidateSet | None = None
    candidates: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    advisory: EndpointAdvisory | None = None
    base_frame_data: dict | None = None
    trajectory: JointTrajectory | None = None
    confirmed_path_id: int | None = None
    lock: threading.RLock = field(default_factory=threading.RLock)
    seq: "itertools.count" = field(default_factory=itertools.count)
    update_queue: "queue.Queue" = field(default_factory=queue.Queue)

    def transition(self, to: SessionState) -> None:
        if (self.state, to) not in LEGAL_TRANSITIONS:
            raise InvalidState(f"illegal transition {self.state.value} -> {to.value}")
        self.state = to


def _map_obstacle(obstacle, transform):
    from .planning import Box, Obstacle, Sphere

    shape = obstacle.shape
    if isinstance(shape, Sphere):
        mapped = Sphere(center=transform.apply(shape.center), radius=shape.radius)
    else:
        q_cal = Quaternion.from_rotation_matrix(transform.rotation)
        mapped = Box(
            center=transform.apply(shape.center),
            half_extents=shape.half_extents,
            orientation=(q_cal * shape.orientation).normalized(),
        )
    return type(obstacle)(id=obstacle.id, shape=mapped, margin=obstacle.margin)


class PlanningService:
    """In-process engine facade: sessions, planning, selection, execution.

    The wire server wraps this object; the CLI drives it directly. All push
    messages also go to any subscriber queues registered per session.
    """

    def __init__(self, workers: int = 4, execution_rate_hz: float = 10.0, pace: bool = False):
        self.workers = workers
        self.execution_rate_hz = execution_rate_hz
        self.pace = pace
        self._sessions: dict[str, Session] = {}
        self._subscribers: dict[str, list] = {}
        self._registry_lock = threading.Lock()

    # -- session plumbing ---------------------------------------------------

    def create_session(self) -> str:
        session = Session(id=uuid.uuid4().hex)
        with self._registry_lock:
            self._sessions[session.id] = session
            self._subscribers[session.id] = []
        return session.id

    def session(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSession(session_id) from None

    def subscribe(self, session_id: str) -> "queue.Queue":
        q = queue.Queue()
        with self._registry_lock:
            self._subscribers[self.session(session_id).id].append(q)
        return q

    def unsubscribe(self, session_id: str, q) -> None:
        with self._registry_lock:
            subs = self._subscribers.get(session_id, [])
            if q in subs:
                subs.remove(q)

    def _publish(self, session: Session, message: dict) -> None:
        message = {"session": session.id, "seq": next(session.seq), **message}
        for q in list(self._subscribers.get(session.id, [])):
            q.put(message)

    def _notice(self, session: Session, level: str, code: str, message: str, **extra):
        self._publish(
            session,
            {"type": "notice", "level": level, "code": code, "message": message, **extra},
        )

    # -- scene --------------------------------------------------------------

    def put_scene(self, session_id: str, scene: Scene) -> None:
        session = self.session(session_id)
        with session.lock:
            if session.state not in (SessionState.IDLE, SessionState.AWAITING_SELECTION):
                raise InvalidState(f"cannot edit scene while {session.state.value}")
            if session.state is SessionState.AWAITING_SELECTION:
                # Edits force a replan: drop candidates and go back to Idle.
                session.transition(SessionState.IDLE)
                session.candidate_set = None
                session.candidates = []
            session.scene = scene
            session.model = load_robot_model(scene.robot_model)
            session.trajectory = None
            session.confirmed_path_id = None
            session.base_frame_data = None

    # -- planning -----------------------------------------------------------

    def _map_scene_to_base(self, scene: Scene, model: RobotModel) -> dict:
        registry = FrameRegistry()
        registry.register(scene.frame, FrameId.ROBOT_BASE, scene.calibration)
        to_base = registry.resolve(scene.frame, FrameId.ROBOT_BASE)

        poses = {}
        for name, pose in (
            ("start", scene.start_pose),
            ("end", scene.end_pose),
            *((f"middle_{i}", p) for i, p in enumerate(scene.middle_poses)),
        ):
            poses[name] = map_pose(pose, scene.frame, FrameId.ROBOT_BASE, registry)

        workspace = Workspace(
            bounds_min=scene.workspace_min,
            bounds_max=scene.workspace_max,
            obstacles=tuple(_map_obstacle(o, to_base) for o in scene.obstacles),
        )
        zones = tuple(_map_obstacle(z, to_base) for z in scene.protection_zones)
        return {
            # Everything below is expressed in the robot base frame; the
            # planner entry point asserts this tag before using it.
            "frame": FrameId.ROBOT_BASE,
            "poses": poses,
            "workspace": workspace,
            "zones": zones,
        }

    def _plan_one_run(self, run: int, legs, workspace, scene: Scene) -> CandidatePath:
        params = scene.planner
        pieces = []
        total_seed = params.base_seed + run
        for leg_idx, (a, b) in enumerate(legs):
            # One leg per middle pose; extra legs perturb the seed by a fixed
            # prime stride so runs stay reproducible.
            leg_seed = total_seed if len(legs) == 1 else total_seed + 7919 * leg_idx
            piece = plan_rrt_star(a, b, workspace, params, seed=leg_seed)
            pieces.append(piece.waypoints if not pieces else piece.waypoints[1:])
        waypoints = np.vstack(pieces)
        raw = CandidatePath(
            id=run,
            waypoints=waypoints,
            cost=0.0,
            seed=total_seed,
        )
        smooth = resample_uniform(
            raw,
            params.m,
            ws=workspace,
            resolution=params.collision_resolution,
            inflation=params.inflation,
        )
        smooth.id = run
        return smooth

    def plan(self, session_id: str, k: int | None = None, base_seed: int | None = None) -> list:
        """Run K candidate plans and move the session to AwaitingSelection.

        Synchronous: callers that need the request path free (the wire
        server) run this on a worker. Candidate and notice messages are
        published as they would be in either case.
        """
        session = self.session(session_id)
        with session.lock:
            if session.scene is None:
                raise InvalidState("no scene loaded")
            if session.state is not SessionState.IDLE:
                raise InvalidState(f"cannot plan while {session.state.value}")
            scene = session.scene
            if k is not None and k != scene.planner.k:
                scene = replace(scene, planner=replace(scene.planner, k=k))
            if base_seed is not None and base_seed != scene.planner.base_seed:
                scene = replace(scene, planner=replace(scene.planner, base_seed=base_seed))
            session.scene = scene
            model = session.model
            session.transition(SessionState.PLANNING)

        try:
            data = self._map_scene_to_base(scene, model)
            assert data["frame"] is FrameId.ROBOT_BASE

            advisory = self._endpoint_advisory(session, model, data["poses"], scene.ik)
            legs_points = (
                [data["poses"]["start"].position]
                + [data["poses"][f"middle_{i}"].position for i in range(len(scene.middle_poses))]
                + [data["poses"]["end"].position]
            )
            legs = list(zip(legs_points[:-1], legs_points[1:]))

            results: list = [None] * scene.planner.k
            errors: list = [None] * scene.planner.k
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=min(self.workers, scene.planner.k)) as pool:
                futures = {
                    pool.submit(self._plan_one_run, i, legs, data["workspace"], scene): i
                    for i in range(scene.planner.k)
                }
                for future, i in futures.items():
                    try:
                        results[i] = future.result()
                    except (
                        StartInCollision,
                        GoalInCollision,
                        PlanningFailed,
                        ResampleCollision,
                    ) as exc:
                        errors[i] = f"{type(exc).__name__}: {exc}"

            paths = [p for p in results if p is not None]
            failures = [PlanFailure(run=i, reason=m) for i, m in enumerate(errors) if m]
            if not paths:
                raise AllRunsFailed(failures)
        except AllRunsFailed as exc:
            with session.lock:
                session.failures = exc.failures
                session.transition(SessionState.IDLE)
            self._notice(
                session,
                "warn",
                "planning_failed",
                "all candidate runs failed",
                failures=[{"run": f.run, "reason": f.reason} for f in exc.failures],
            )
            raise PlanningFailed(str(exc)) from exc
        except (StartInCollision, GoalInCollision) as exc:
            with session.lock:
                session.transition(SessionState.IDLE)
            self._notice(session, "warn", "planning_failed", str(exc))
            raise
        except Exception:
            with session.lock:
                session.transition(SessionState.FAULT)
            self._notice(session, "fault", "planning_error", "unexpected planning error")
            raise

        with session.lock:
            session.base_frame_data = data
            session.candidates = paths
            session.failures = failures
            session.advisory = advisory
            session.candidate_set = CandidateSet.from_candidates(
                session.id,
                paths,
                threshold=scene.selection.threshold,
                cadence_hz=scene.selection.cadence_hz,
            )
            session.transition(SessionState.AWAITING_SELECTION)

        self._publish(
            session,
            {
                "type": "candidates",
                "candidates": [self._candidate_payload(p, advisory) for p in paths],
                "failures": [{"run": f.run, "reason": f.reason} for f in failures],
            },
        )
        return paths

    def _endpoint_advisory(self, session, model, poses, ik_config) -> EndpointAdvisory:
        notices = {}
        for name in ("start", "end"):
            result = solve_ik(model, poses[name], model.home, ik_config)
            notice = classify_reachability(result)
            notices[name] = notice.code
            if notice.code != "reachable":
                self._notice(
                    session,
                    "warn",
                    notice.code,
                    f"{name} pose: {notice.message}",
                    endpoint=name,
                )
        return EndpointAdvisory(start=notices["start"], end=notices["end"])

    @staticmethod
    def _candidate_payload(path: CandidatePath, advisory: EndpointAdvisory) -> dict:
        return {
            "id": path.id,
            "seed": path.seed,
            "cost": path.cost,
            "status": path.status.value,
            "waypoints": path.waypoints.tolist(),
            "reachability": {"start": advisory.start, "end": advisory.end},
        }

    # -- selection ----------------------------------------------------------

    def queue_marker_updates(self, session_id: str, updates) -> None:
        session = self.session(session_id)
        for u in updates:
            session.update_queue.put(u)

    def selection_cycle(self, session_id: str):
        """Drain queued marker updates and run one detection cycle."""
        session = self.session(session_id)
        with session.lock:
            if session.state is not SessionState.AWAITING_SELECTION:
                raise InvalidState(f"no selection loop while {session.state.value}")
            updates = []
            while True:
                try:
                    updates.append(session.update_queue.get_nowait())
                except queue.Empty:
                    break
            updates.sort(key=lambda u: u.seq)
            event = apply_updates_and_detect(session.candidate_set, updates)
        if event is not None:
            self._publish(
                session,
                {
                    "type": "selection_event",
                    "selected": event.selected_id,
                    "discarded": list(event.discarded_ids),
                    "delta": event.delta,
                },
            )
        return event

    def run_selection_loop(self, session_id: str, stop: threading.Event) -> None:
        """Blocking cadence loop; the wire server runs this on a thread."""
        session = self.session(session_id)
        period = 1.0 / (session.candidate_set.cadence_hz if session.candidate_set else 60.0)
        while not stop.is_set():
            with session.lock:
                if session.state is not SessionState.AWAITING_SELECTION:
                    break
            try:
                self.selection_cycle(session_id)
            except InvalidState:
                break
            time.sleep(period)

    def select_path(self, session_id: str, path_id: int) -> None:
        """Headless stand-in for the human: mark one candidate Selected.

        Unlike a marker drag this does not move any markers, so costs and
        waypoints stay exactly as planned.
        """
        session = self.session(session_id)
        with session.lock:
            if session.state is not SessionState.AWAITING_SELECTION:
                raise InvalidState(f"cannot select while {session.state.value}")
            cset = session.candidate_set
            if path_id not in cset.paths:
                from .selection import UnknownPath

                raise UnknownPath(path_id)
            if cset.selected_id is not None and cset.selected_id != path_id:
                raise NotSelected(f"path {cset.selected_id} is already selected")
            discarded = []
            for pid, path in cset.paths.items():
                if pid == path_id:
                    path.status = PathStatus.SELECTED
                elif path.status is PathStatus.PROPOSED:
                    path.status = PathStatus.DISCARDED
                    discarded.append(pid)
            cset.selected_id = path_id
        self._publish(
            session,
            {
                "type": "selection_event",
                "selected": path_id,
                "discarded": sorted(discarded),
                "delta": 0.0,
            },
        )

    # -- confirmation and execution ------------------------------------------

    def confirm(self, session_id: str, path_id: int) -> JointTrajectory:
        """Confirm the selected path, build and validate its joint trajectory."""
        session = self.session(session_id)
        with session.lock:
            if session.state is not SessionState.AWAITING_SELECTION:
                raise InvalidState(f"cannot confirm while {session.state.value}")
            scene = session.scene
            model = session.model
            data = session.base_frame_data
            cset = session.candidate_set

            path = cset.paths.get(path_id)
            if path is None:
                from .selection import UnknownPath

                raise UnknownPath(path_id)
            if path.status is not PathStatus.SELECTED:
                raise NotSelected(f"path {path_id} is {path.status.value}")

            # Operator-modified markers must still clear the obstacles.
            params = scene.planner
            markers = path.waypoints
            for i in range(len(markers) - 1):
                if not segment_free(
                    markers[i],
                    markers[i + 1],
                    data["workspace"],
                    params.collision_resolution,
                    params.inflation,
                ):
                    self._notice(
                        session,
                        "warn",
                        "order_rejected",
                        f"path {path_id} markers collide after modification",
                    )
                    raise OrderRejected(
                        f"modified path {path_id} no longer clears the obstacles"
                    )

            order = confirm_selection(cset, path_id)
            try:
                timed = cosine_reparameterize(order.waypoints, params.n_t)
                schedule = build_tool_schedule(
                    timed,
                    data["poses"]["start"].orientation,
                    data["poses"]["end"].orientation,
                    scene.duration,
                )
                trajectory = build_joint_trajectory(
                    model, schedule, scene.ik, jump_threshold=scene.jump_threshold
                )
            except (WaypointUnreachable, JointJump, VelocityLimitExceeded) as exc:
                session.transition(SessionState.FAULT)
                self._notice(session, "fault", "trajectory_failed", str(exc))
                raise

            report = validate_trajectory(
                trajectory, model, zones=data["zones"], accel_bound=scene.accel_bound
            )
            if not report.passed:
                session.transition(SessionState.FAULT)
                first = report.violations[0]
                self._notice(
                    session,
                    "fault",
                    "validation_failed",
                    first.detail,
                    violations=[
                        {
                            "kind": v.kind,
                            "index": v.index,
                            "joint": v.joint,
                            "zone_id": v.zone_id,
                            "detail": v.detail,
                        }
                        for v in report.violations
                    ],
                )
                raise ValidationFailed(report)

            session.trajectory = trajectory
            session.confirmed_path_id = path_id
            return trajectory

    def execute(self, session_id: str, rate_hz: float | None = None, pace: bool | None = None):
        """Stream execution frames from the validated trajectory.

        Yields one frame per trajectory sample plus a terminal done frame.
        rate_hz controls real-time pacing only (frames carry the trajectory's
        own timestamps); pacing defaults to the service setting.
        """
        session = self.session(session_id)
        with session.lock:
            if session.trajectory is None or session.confirmed_path_id is None:
                raise InvalidState("no confirmed, validated trajectory to execute")
            if session.state is not SessionState.AWAITING_SELECTION:
                raise InvalidState(f"cannot execute while {session.state.value}")
            session.transition(SessionState.EXECUTING)
            trajectory = session.trajectory
            model = session.model

        do_pace = self.pace if pace is None else pace
        rate = rate_hz or self.execution_rate_hz
        period = 1.0 / rate if rate > 0 else 0.0

        def frames():
            try:
                for k in range(len(trajectory)):
                    pose = forward_kinematics(model, trajectory.q[k])
                    frame = {
                        "type": "execution_frame",
                        "kind": "frame",
                        "t": float(trajectory.times[k]),
                        "q": trajectory.q[k].tolist(),
                        "tool": {
                            "position": pose.position.tolist(),
                            "orientation": [
                                pose.orientation.w,
                                pose.orientation.x,
                                pose.orientation.y,
                                pose.orientation.z,
                            ],
                        },
                    }
                    self._publish(session, frame)
                    yield frame
                    if do_pace and period > 0:
                        time.sleep(period)
            except BaseException:
                with session.lock:
                    session.transition(SessionState.FAULT)
                self._notice(session, "fault", "execution_aborted", "execution aborted")
                raise
            done = {
                "type": "execution_frame",
                "kind": "done",
                "t": float(trajectory.times[-1]),
                "path_id": session.confirmed_path_id,
            }
            with session.lock:
                session.transition(SessionState.DONE)
            self._publish(session, done)
            yield done

        return frames()

    def export_trajectory(self, session_id: str) -> bytes:
        session = self.session(session_id)
        with session.lock:
            if session.trajectory is None:
                raise InvalidState("no trajectory to export")
            return export_trajectory(session.trajectory)
