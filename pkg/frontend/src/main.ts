/**
 * Browser bootstrap: DOM panels, pointer wiring, and the render loop.
 * Served by `holoplan serve --frontend frontend/dist` at the service origin.
 */

import * as THREE from "three";
import { ConsoleController } from "./app.js";
import { scaleObstacle, translateObstacle, translatePose } from "./gizmo.js";
import type { SceneJson, Vec3 } from "./protocol.js";
import { canDragMarkers, canEditScene, type ConsoleState } from "./state.js";
import { ConsoleView } from "./view3d.js";

const controller = new ConsoleController({ baseUrl: "" });

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const view = new ConsoleView(canvas);

const statusEl = document.getElementById("status")!;
const candidatesEl = document.getElementById("candidates")!;
const noticesEl = document.getElementById("notices")!;
const planButton = document.getElementById("plan") as HTMLButtonElement;
const confirmButton = document.getElementById("confirm") as HTMLButtonElement;
const loadSceneButton = document.getElementById("load-scene") as HTMLButtonElement;
const sceneInput = document.getElementById("scene-json") as HTMLTextAreaElement;
const modeSelect = document.getElementById("gizmo-mode") as HTMLSelectElement;
const targetSelect = document.getElementById("gizmo-target") as HTMLSelectElement;

let lastCandidateSignature = "";
let lastNoticeCount = 0;

function renderPanel(state: ConsoleState): void {
  statusEl.textContent =
    `${state.connected ? "connected" : "offline"} | ${state.phase}` +
    (state.sceneDraft ? " | scene: draft" : "");

  planButton.disabled = !(state.connected && state.phase === "idle" && state.scene);
  confirmButton.disabled = !(state.phase === "awaiting_selection" && state.selectedId !== null);
  loadSceneButton.disabled = !canEditScene(state);
  const editable = canEditScene(state);
  modeSelect.disabled = !editable;
  targetSelect.disabled = !editable;

  const rows: string[] = [];
  for (const c of state.candidates.values()) {
    const badge = c.reachability.end === "reachable" ? "reachable" : c.reachability.end;
    rows.push(
      `<li style="color:${c.status === "discarded" ? "#777" : c.color}">` +
        `path ${c.id} — ${c.cost.toFixed(3)} m — ${c.status} — ${badge}</li>`,
    );
  }
  for (const f of state.failures) {
    rows.push(`<li style="color:#b55">run ${f.run} failed: ${f.reason}</li>`);
  }
  candidatesEl.innerHTML = rows.join("");

  noticesEl.innerHTML = state.notices
    .slice(-8)
    .map((n) => `<li class="${n.level}">[${n.level}] ${n.code}: ${n.message}</li>`)
    .join("");
}

controller.store.onChange((state) => {
  renderPanel(state);
  view.syncScene(state);
  const signature = JSON.stringify(
    [...state.candidates.values()].map((c) => [c.id, c.waypoints.length]),
  );
  if (signature !== lastCandidateSignature) {
    lastCandidateSignature = signature;
    view.syncCandidates(state);
  }
  view.restyleCandidates(state);
  view.syncPlayback(state);
  if (state.notices.length !== lastNoticeCount) {
    lastNoticeCount = state.notices.length;
  }
});

planButton.addEventListener("click", () => void controller.plan());
confirmButton.addEventListener("click", () => void controller.confirm());
loadSceneButton.addEventListener("click", () => {
  try {
    const scene = JSON.parse(sceneInput.value) as SceneJson;
    void controller.authorScene(scene);
  } catch (error) {
    alert(`scene JSON invalid: ${error}`);
  }
});

// Pointer interaction: drag candidate markers (selection), drag scene
// targets (translate/scale via the gizmo helpers).
let activeDrag:
  | { kind: "marker"; pathId: number; index: number; gesture: ReturnType<ConsoleController["beginMarkerDrag"]> }
  | { kind: "scene"; apply: (p: Vec3) => void }
  | null = null;

function pointerNdc(event: PointerEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * 2 - 1,
    y: -((event.clientY - rect.top) / rect.height) * 2 + 1,
  };
}

canvas.addEventListener("pointerdown", (event) => {
  const state = controller.state;
  const ndc = pointerNdc(event);
  const hit = view.pickMarker(ndc);
  if (hit && canDragMarkers(state)) {
    const candidate = state.candidates.get(hit.pathId);
    if (candidate && candidate.status !== "discarded" && candidate.status !== "executed") {
      activeDrag = {
        kind: "marker",
        pathId: hit.pathId,
        index: hit.index,
        gesture: controller.beginMarkerDrag(hit.pathId, hit.index),
      };
      view.controls.enabled = false;
      return;
    }
  }
  if (!canEditScene(state) || !state.scene) return;
  const target = targetSelect.value;
  const mode = modeSelect.value;
  if (target === "none") return;
  activeDrag = {
    kind: "scene",
    apply: (p: Vec3) => {
      const scene = controller.state.scene!;
      if (target === "start_pose" || target === "end_pose") {
        if (mode === "translate") controller.editScene(translatePose(scene, target, p));
      } else if (mode === "translate") {
        const next = translateObstacle(scene, target, p);
        if (next) controller.editScene(next);
      } else if (mode === "scale") {
        const next = scaleObstacle(scene, target, Math.max(...p.map(Math.abs)));
        if (next) controller.editScene(next);
      }
    },
  };
  view.controls.enabled = false;
});

canvas.addEventListener("pointermove", (event) => {
  if (!activeDrag) return;
  const ndc = pointerNdc(event);
  const anchor = view.camera.position
    .clone()
    .add(view.camera.getWorldDirection(new THREE.Vector3()).multiplyScalar(1.2));
  const point = view.dragPlanePoint(ndc, anchor);
  if (!point) return;
  if (activeDrag.kind === "marker") {
    activeDrag.gesture.move(point);
    view.moveMarkerVisual(activeDrag.pathId, activeDrag.index, point);
  } else {
    activeDrag.apply(point);
  }
});

window.addEventListener("pointerup", () => {
  if (activeDrag?.kind === "marker") activeDrag.gesture.end();
  activeDrag = null;
  view.controls.enabled = true;
});

function resize(): void {
  view.resize(canvas.clientWidth, canvas.clientHeight);
}
window.addEventListener("resize", resize);

async function start(): Promise<void> {
  await controller.connect();
  resize();
  const loop = () => {
    view.render();
    requestAnimationFrame(loop);
  };
  loop();

  // Populate gizmo target list whenever the scene changes.
  controller.store.onChange((state) => {
    const options = ["none", "start_pose", "end_pose"].concat(
      (state.scene?.obstacles ?? []).map((o) => o.id),
    );
    if (targetSelect.options.length !== options.length) {
      targetSelect.innerHTML = options
        .map((o) => `<option value="${o}">${o}</option>`)
        .join("");
    }
  });
}

void start();
