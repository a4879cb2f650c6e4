/**
 * Wire types shared with the planning service.
 *
 * Positions are meters, quaternions scalar-first [w, x, y, z]. Every push
 * message carries the session id and a per-session monotone sequence number.
 */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface PoseJson {
  position: Vec3;
  orientation: Quat;
}

export interface ObstacleJson {
  id: string;
  type: "sphere" | "box";
  center: Vec3;
  radius?: number;
  half_extents?: Vec3;
  orientation?: Quat;
  margin?: number;
}

/** Scene document (holoplan-scene/1); edited as plain JSON by the console. */
export interface SceneJson {
  schema: string;
  robot_model: string;
  frame: string;
  calibration: { rotation: Quat; translation: Vec3 };
  start_pose: PoseJson;
  end_pose: PoseJson;
  middle_poses: PoseJson[];
  obstacles: ObstacleJson[];
  protection_zones: ObstacleJson[];
  workspace: { bounds_min: Vec3; bounds_max: Vec3 };
  planner: Record<string, number | null>;
  ik: Record<string, number>;
  selection: { threshold: number; cadence_hz: number };
  duration: number;
  accel_bound: number;
  jump_threshold: number;
}

export type PathStatus = "proposed" | "selected" | "discarded" | "executed";

export interface CandidateJson {
  id: number;
  seed: number;
  cost: number;
  status: PathStatus;
  waypoints: Vec3[];
  reachability: { start: string; end: string };
}

export interface CandidatesMessage {
  type: "candidates";
  session: string;
  seq: number;
  candidates: CandidateJson[];
  failures: { run: number; reason: string }[];
}

export interface SelectionEventMessage {
  type: "selection_event";
  session: string;
  seq: number;
  selected: number;
  discarded: number[];
  delta: number;
}

export interface ExecutionFrameMessage {
  type: "execution_frame";
  session: string;
  seq: number;
  kind: "frame" | "done" | "fault";
  t?: number;
  q?: number[];
  tool?: { position: Vec3; orientation: Quat };
  path_id?: number;
}

export interface NoticeMessage {
  type: "notice";
  session: string;
  seq: number;
  level: "info" | "warn" | "fault";
  code: string;
  message: string;
  [extra: string]: unknown;
}

export type ServerMessage =
  | CandidatesMessage
  | SelectionEventMessage
  | ExecutionFrameMessage
  | NoticeMessage;

export interface MarkerUpdateMessage {
  type: "marker_update";
  path_id: number;
  marker: number;
  position: Vec3;
  seq: number;
}

const MESSAGE_TYPES = new Set([
  "candidates",
  "selection_event",
  "execution_frame",
  "notice",
]);

/** Parse one channel payload; returns null for junk rather than throwing. */
export function parseServerMessage(raw: unknown): ServerMessage | null {
  let data: unknown = raw;
  if (data instanceof Uint8Array) {
    data = new TextDecoder().decode(data); // node ws delivers Buffers
  }
  if (typeof data === "string") {
    try {
      data = JSON.parse(data);
    } catch {
      return null;
    }
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (typeof msg.type !== "string" || !MESSAGE_TYPES.has(msg.type)) return null;
  if (typeof msg.seq !== "number" || typeof msg.session !== "string") return null;
  switch (msg.type) {
    case "candidates":
      if (!Array.isArray(msg.candidates)) return null;
      break;
    case "selection_event":
      if (typeof msg.selected !== "number" || !Array.isArray(msg.discarded)) return null;
      break;
    case "execution_frame":
      if (msg.kind !== "frame" && msg.kind !== "done" && msg.kind !== "fault") return null;
      break;
    case "notice":
      if (typeof msg.code !== "string" || typeof msg.message !== "string") return null;
      break;
  }
  return msg as unknown as ServerMessage;
}
