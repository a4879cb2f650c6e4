"""Operator path selection: detect which candidate a human is manipulating.

Each update cycle applies queued marker moves, recomputes every candidate's
path-length metric (the summed Cartesian distances between its markers) and
compares it to the previous cycle's value. A per-cycle change beyond the
threshold marks that path Selected and discards the motionless rest; when
several paths move in one cycle the largest delta wins, ties broken by
lowest path id. Deltas are per cycle, not cumulative: previous metrics are
refreshed every cycle whether or not anything was detected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .planning import CandidatePath, PathStatus

DEFAULT_THRESHOLD = 0.010   # meters of metric change per cycle
DEFAULT_CADENCE_HZ = 60.0


class DegeneratePath(ValueError):
    pass


class UnknownPath(KeyError):
    pass


class StaleSequence(ValueError):
    pass


class BadMarkerIndex(IndexError):
    pass


class NotSelected(RuntimeError):
    pass


class AlreadyExecuted(RuntimeError):
    pass


@dataclass(frozen=True)
class MarkerUpdate:
    path_id: int
    marker: int
    position: np.ndarray
    seq: int

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=float).reshape(3)
        )


@dataclass(frozen=True)
class SelectionEvent:
    selected_id: int
    discarded_ids: tuple
    delta: float


@dataclass(frozen=True)
class ExecutionOrder:
    path_id: int
    waypoints: np.ndarray


def path_length_metric(path: CandidatePath) -> float:
    """Sum of Cartesian distances between consecutive markers."""
    markers = np.asarray(path.waypoints, dtype=float)
    if len(markers) < 2:
        raise DegeneratePath(f"path {path.id} has fewer than 2 markers")
    return float(np.sum(np.linalg.norm(np.diff(markers, axis=0), axis=1)))


@dataclass
class CandidateSet:
    """Live marker state for one session's candidates; single-writer."""

    session_id: str
    paths: dict = field(default_factory=dict)
    previous_metric: dict = field(default_factory=dict)
    threshold: float = DEFAULT_THRESHOLD
    cadence_hz: float = DEFAULT_CADENCE_HZ
    last_seq: int = -1
    selected_id: int | None = None

    @staticmethod
    def from_candidates(
        session_id: str,
        candidates,
        threshold: float = DEFAULT_THRESHOLD,
        cadence_hz: float = DEFAULT_CADENCE_HZ,
    ) -> "CandidateSet":
        # Markers are live copies: operator drags must not mutate the
        # planner's output arrays.
        paths = {}
        for c in candidates:
            paths[c.id] = CandidatePath(
                id=c.id,
                waypoints=np.array(c.waypoints, copy=True),
                cost=c.cost,
                seed=c.seed,
                status=c.status,
            )
        cset = CandidateSet(
            session_id=session_id,
            paths=paths,
            threshold=threshold,
            cadence_hz=cadence_hz,
        )
        cset.previous_metric = {
            pid: path_length_metric(p) for pid, p in paths.items()
        }
        return cset

    def statuses(self) -> dict:
        return {pid: p.status for pid, p in self.paths.items()}


def apply_updates_and_detect(cset: CandidateSet, updates) -> SelectionEvent | None:
    """Run one update cycle: apply ordered marker moves, detect manipulation.

    Updates must arrive in strictly increasing sequence order. Moves against
    Discarded or Executed paths are ignored (they can no longer matter);
    moves against a Selected path keep reshaping it ahead of confirmation.
    """
    for update in updates:
        if update.seq <= cset.last_seq:
            raise StaleSequence(
                f"sequence {update.seq} <= last applied {cset.last_seq}"
            )
        cset.last_seq = update.seq
        path = cset.paths.get(update.path_id)
        if path is None:
            raise UnknownPath(update.path_id)
        if not 0 <= update.marker < len(path.waypoints):
            raise BadMarkerIndex(
                f"marker {update.marker} outside path {path.id} "
                f"({len(path.waypoints)} markers)"
            )
        if path.status in (PathStatus.DISCARDED, PathStatus.EXECUTED):
            continue
        path.waypoints[update.marker] = update.position

    event = None
    if cset.selected_id is None:
        movers = []
        for pid, path in cset.paths.items():
            if path.status is not PathStatus.PROPOSED:
                continue
            delta = abs(path_length_metric(path) - cset.previous_metric[pid])
            if delta > cset.threshold:
                movers.append((delta, pid))
        if movers:
            # Largest per-cycle delta wins; ties break toward the lowest id.
            movers.sort(key=lambda item: (-item[0], item[1]))
            delta, winner = movers[0]
            discarded = []
            for pid, path in cset.paths.items():
                if pid == winner:
                    path.status = PathStatus.SELECTED
                elif path.status is PathStatus.PROPOSED:
                    path.status = PathStatus.DISCARDED
                    discarded.append(pid)
            cset.selected_id = winner
            event = SelectionEvent(
                selected_id=winner, discarded_ids=tuple(sorted(discarded)), delta=delta
            )

    for pid, path in cset.paths.items():
        cset.previous_metric[pid] = path_length_metric(path)
    return event


def confirm_selection(cset: CandidateSet, path_id: int) -> ExecutionOrder:
    """Finalize the Selected path: mark Executed, emit its current markers."""
    path = cset.paths.get(path_id)
    if path is None:
        raise UnknownPath(path_id)
    if path.status is PathStatus.EXECUTED:
        raise AlreadyExecuted(f"path {path_id} was already confirmed")
    if path.status is not PathStatus.SELECTED:
        raise NotSelected(f"path {path_id} is {path.status.value}, not selected")
    path.status = PathStatus.EXECUTED
    return ExecutionOrder(path_id=path_id, waypoints=np.array(path.waypoints, copy=True))
