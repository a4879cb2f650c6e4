/**
 * Console state: a mirror of the server session driven purely by push
 * messages. The console never flips candidate statuses on its own; local
 * scene edits are marked draft until the server acknowledges the upload.
 */

import type {
  CandidateJson,
  ExecutionFrameMessage,
  SceneJson,
  ServerMessage,
  Vec3,
} from "./protocol.js";

export type SessionPhase =
  | "disconnected"
  | "idle"
  | "planning"
  | "awaiting_selection"
  | "executing"
  | "done"
  | "fault";

export interface CandidateView extends CandidateJson {
  color: string;
}

export interface PlaybackState {
  playing: boolean;
  done: boolean;
  fault: boolean;
  t: number;
  tool: { position: Vec3; orientation: [number, number, number, number] } | null;
  q: number[] | null;
  frames: number;
}

export interface NoticeView {
  level: string;
  code: string;
  message: string;
  seq: number;
}

export interface ConsoleState {
  phase: SessionPhase;
  connected: boolean;
  sessionId: string | null;
  scene: SceneJson | null;
  sceneDraft: boolean;
  candidates: Map<number, CandidateView>;
  failures: { run: number; reason: string }[];
  selectedId: number | null;
  confirmedId: number | null;
  playback: PlaybackState;
  notices: NoticeView[];
  lastSeq: number;
}

// Distinct hues per candidate id; repeats after eight.
const PALETTE = [
  "#e6553a", "#2f9e62", "#3a78e6", "#d7a32e",
  "#9a4fd0", "#25b5c4", "#d04f8c", "#7a8c2e",
];

export const DISCARDED_GREY = "#6f6f6f";

export function candidateColor(id: number): string {
  return PALETTE[((id % PALETTE.length) + PALETTE.length) % PALETTE.length];
}

/** The color a candidate renders with right now: grey once discarded. */
export function displayColor(candidate: CandidateView): string {
  return candidate.status === "discarded" ? DISCARDED_GREY : candidate.color;
}

export function initialState(): ConsoleState {
  return {
    phase: "disconnected",
    connected: false,
    sessionId: null,
    scene: null,
    sceneDraft: false,
    candidates: new Map(),
    failures: [],
    selectedId: null,
    confirmedId: null,
    playback: emptyPlayback(),
    notices: [],
    lastSeq: -1,
  };
}

function emptyPlayback(): PlaybackState {
  return { playing: false, done: false, fault: false, t: 0, tool: null, q: null, frames: 0 };
}

export class ConsoleStore {
  state: ConsoleState = initialState();
  private listeners: Array<(s: ConsoleState) => void> = [];

  onChange(listener: (s: ConsoleState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  connected(sessionId: string): void {
    this.state.connected = true;
    this.state.sessionId = sessionId;
    if (this.state.phase === "disconnected") this.state.phase = "idle";
    this.emit();
  }

  disconnected(): void {
    this.state.connected = false;
    this.emit();
  }

  /** Local scene edit: held as draft until the server acks the upload. */
  sceneEdited(scene: SceneJson): void {
    this.state.scene = scene;
    this.state.sceneDraft = true;
    this.emit();
  }

  sceneAcknowledged(): void {
    this.state.sceneDraft = false;
    // A scene upload discards candidates server-side; mirror that.
    if (this.state.phase === "awaiting_selection") this.state.phase = "idle";
    this.state.candidates = new Map();
    this.state.selectedId = null;
    this.state.confirmedId = null;
    this.state.playback = emptyPlayback();
    this.emit();
  }

  planRequested(): void {
    this.state.phase = "planning";
    this.emit();
  }

  confirmRequested(pathId: number): void {
    this.state.confirmedId = pathId;
    this.emit();
  }

  /** Resync snapshot from GET /sessions/{sid} after a reconnect. */
  resync(info: { state: string; candidates: CandidateJson[] }): void {
    this.state.phase = info.state as SessionPhase;
    this.state.candidates = new Map(
      info.candidates.map((c) => [c.id, { ...c, color: candidateColor(c.id) }]),
    );
    for (const c of this.state.candidates.values()) {
      if (c.status === "selected") this.state.selectedId = c.id;
    }
    this.emit();
  }

  /** Single entry point for server push; returns false for stale/junk. */
  apply(message: ServerMessage): boolean {
    if (message.seq <= this.state.lastSeq) return false;
    this.state.lastSeq = message.seq;
    switch (message.type) {
      case "candidates": {
        this.state.candidates = new Map(
          message.candidates.map((c) => [c.id, { ...c, color: candidateColor(c.id) }]),
        );
        this.state.failures = message.failures;
        this.state.selectedId = null;
        this.state.confirmedId = null;
        this.state.playback = emptyPlayback();
        this.state.phase = "awaiting_selection";
        break;
      }
      case "selection_event": {
        for (const candidate of this.state.candidates.values()) {
          if (candidate.id === message.selected) candidate.status = "selected";
          else if (message.discarded.includes(candidate.id)) candidate.status = "discarded";
        }
        this.state.selectedId = message.selected;
        break;
      }
      case "execution_frame":
        this.applyFrame(message);
        break;
      case "notice": {
        this.state.notices.push({
          level: message.level,
          code: message.code,
          message: message.message,
          seq: message.seq,
        });
        if (message.level === "fault") this.state.phase = "fault";
        if (message.code === "planning_failed") this.state.phase = "idle";
        break;
      }
    }
    this.emit();
    return true;
  }

  private applyFrame(frame: ExecutionFrameMessage): void {
    const pb = this.state.playback;
    if (frame.kind === "frame") {
      this.state.phase = "executing";
      pb.playing = true;
      pb.frames += 1;
      pb.t = frame.t ?? pb.t;
      pb.tool = frame.tool ?? pb.tool;
      pb.q = frame.q ?? pb.q;
      const confirmed = this.state.confirmedId;
      if (confirmed !== null) {
        const candidate = this.state.candidates.get(confirmed);
        if (candidate) candidate.status = "executed";
      }
    } else if (frame.kind === "done") {
      pb.playing = false;
      pb.done = true;
      this.state.phase = "done";
    } else {
      pb.playing = false;
      pb.fault = true;
      this.state.phase = "fault";
    }
  }
}

/** Scene edits are only legal while idle or awaiting selection. */
export function canEditScene(state: ConsoleState): boolean {
  return (
    state.connected && (state.phase === "idle" || state.phase === "awaiting_selection")
  );
}

/** Marker drags are only meaningful while the selection loop runs. */
export function canDragMarkers(state: ConsoleState): boolean {
  return state.connected && state.phase === "awaiting_selection";
}
