/**
 * Gizmo rules and scene mutations for the draggable targets.
 *
 * Poses translate and rotate; obstacles additionally scale; path markers
 * only translate (a marker is a position, rotation is meaningless for it).
 * Scale clamps at a minimum extent client-side: a drag that would go to or
 * below zero produces the clamped size, and no mutation at all when the
 * clamp leaves the size unchanged.
 */

import type { ObstacleJson, Quat, SceneJson, Vec3 } from "./protocol.js";

export type GizmoMode = "translate" | "rotate" | "scale";

export type GizmoTarget =
  | { kind: "start_pose" }
  | { kind: "end_pose" }
  | { kind: "obstacle"; id: string }
  | { kind: "marker"; pathId: number; index: number };

export const MIN_EXTENT = 0.01; // meters

export function allowedModes(target: GizmoTarget): GizmoMode[] {
  switch (target.kind) {
    case "start_pose":
    case "end_pose":
      return ["translate", "rotate"];
    case "obstacle":
      return ["translate", "rotate", "scale"];
    case "marker":
      return ["translate"];
  }
}

function quatMultiply(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

function normalized(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

function clone(scene: SceneJson): SceneJson {
  return JSON.parse(JSON.stringify(scene)) as SceneJson;
}

export function translatePose(
  scene: SceneJson,
  which: "start_pose" | "end_pose",
  position: Vec3,
): SceneJson {
  const next = clone(scene);
  next[which].position = position;
  return next;
}

export function rotatePose(
  scene: SceneJson,
  which: "start_pose" | "end_pose",
  delta: Quat,
): SceneJson {
  const next = clone(scene);
  next[which].orientation = normalized(quatMultiply(delta, next[which].orientation));
  return next;
}

function findObstacle(scene: SceneJson, id: string): ObstacleJson | undefined {
  return scene.obstacles.find((o) => o.id === id);
}

export function translateObstacle(scene: SceneJson, id: string, center: Vec3): SceneJson | null {
  const next = clone(scene);
  const obstacle = findObstacle(next, id);
  if (!obstacle) return null;
  obstacle.center = center;
  return next;
}

export function rotateObstacle(scene: SceneJson, id: string, delta: Quat): SceneJson | null {
  const next = clone(scene);
  const obstacle = findObstacle(next, id);
  if (!obstacle || obstacle.type !== "box") return null;
  obstacle.orientation = normalized(
    quatMultiply(delta, obstacle.orientation ?? [1, 0, 0, 0]),
  );
  return next;
}

export function clampExtent(value: number): number {
  return Math.max(MIN_EXTENT, value);
}

/**
 * Scale an obstacle toward the requested size. Returns null when the clamp
 * makes the drag a no-op, so nothing is uploaded.
 */
export function scaleObstacle(
  scene: SceneJson,
  id: string,
  requested: Vec3 | number,
): SceneJson | null {
  const current = findObstacle(scene, id);
  if (!current) return null;
  if (current.type === "sphere") {
    const radius = clampExtent(typeof requested === "number" ? requested : requested[0]);
    if (radius === current.radius) return null;
    const next = clone(scene);
    findObstacle(next, id)!.radius = radius;
    return next;
  }
  const target = (
    typeof requested === "number" ? [requested, requested, requested] : requested
  ).map(clampExtent) as Vec3;
  const existing = current.half_extents ?? [MIN_EXTENT, MIN_EXTENT, MIN_EXTENT];
  if (target.every((v, i) => v === existing[i])) return null;
  const next = clone(scene);
  findObstacle(next, id)!.half_extents = target;
  return next;
}

/** Marker drags are not scene mutations; they ride the channel instead. */
export function isSceneTarget(target: GizmoTarget): boolean {
  return target.kind !== "marker";
}
