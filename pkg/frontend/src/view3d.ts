/**
 * Three.js rendering of the console state: scene geometry, candidate paths
 * with per-path colors and marker spheres, and the execution playback
 * marker. Pure presentation; all state changes come from the store.
 *
 * The service frame is z-up; three.js is y-up. Everything lives under a
 * root group rotated so service coordinates can be used directly.
 */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import type { ObstacleJson, PoseJson, Vec3 } from "./protocol.js";
import { displayColor, type CandidateView, type ConsoleState } from "./state.js";

const MARKER_RADIUS = 0.012;

function toVec3(v: Vec3): THREE.Vector3 {
  return new THREE.Vector3(v[0], v[1], v[2]);
}

function toQuat(q: [number, number, number, number]): THREE.Quaternion {
  // Wire format is scalar-first; three is (x, y, z, w).
  return new THREE.Quaternion(q[1], q[2], q[3], q[0]);
}

export interface MarkerHit {
  pathId: number;
  index: number;
  point: THREE.Vector3;
}

export class ConsoleView {
  readonly renderer: THREE.WebGLRenderer;
  readonly camera: THREE.PerspectiveCamera;
  readonly scene = new THREE.Scene();
  readonly controls: OrbitControls;
  /** Root group: rotates service z-up into three's y-up. */
  readonly root = new THREE.Group();

  private sceneGroup = new THREE.Group();
  private pathsGroup = new THREE.Group();
  private markerMeshes = new Map<number, THREE.Mesh[]>();
  private pathLines = new Map<number, THREE.Line>();
  private playbackMarker: THREE.Mesh;
  private raycaster = new THREE.Raycaster();

  constructor(canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.scene.background = new THREE.Color("#14161a");

    this.camera = new THREE.PerspectiveCamera(55, 1, 0.01, 50);
    this.camera.position.set(1.4, 1.1, 1.4);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.target.set(0.3, 0.4, 0.0);

    this.root.rotation.x = -Math.PI / 2;
    this.scene.add(this.root);

    const ambient = new THREE.AmbientLight(0xffffff, 0.7);
    const key = new THREE.DirectionalLight(0xffffff, 1.2);
    key.position.set(2, 3, 1);
    this.scene.add(ambient, key);

    const grid = new THREE.GridHelper(2.4, 24, 0x3a3f46, 0x262a30);
    this.scene.add(grid);
    this.scene.add(new THREE.AxesHelper(0.25));

    this.root.add(this.sceneGroup, this.pathsGroup);

    this.playbackMarker = new THREE.Mesh(
      new THREE.SphereGeometry(0.02, 24, 16),
      new THREE.MeshStandardMaterial({ color: "#ffffff", emissive: "#446688" }),
    );
    this.playbackMarker.visible = false;
    this.root.add(this.playbackMarker);
  }

  resize(width: number, height: number): void {
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  render(): void {
    this.controls.update();
    this.renderer.render(this.scene, this.camera);
  }

  private poseMarker(pose: PoseJson, color: string): THREE.Group {
    const group = new THREE.Group();
    const body = new THREE.Mesh(
      new THREE.ConeGeometry(0.025, 0.07, 20),
      new THREE.MeshStandardMaterial({ color }),
    );
    body.rotation.x = Math.PI / 2; // cone axis along local z (tool axis)
    group.add(body, new THREE.AxesHelper(0.08));
    group.position.copy(toVec3(pose.position));
    group.quaternion.copy(toQuat(pose.orientation));
    return group;
  }

  private obstacleMesh(obstacle: ObstacleJson, color: string, opacity: number): THREE.Mesh {
    let geometry: THREE.BufferGeometry;
    if (obstacle.type === "sphere") {
      geometry = new THREE.SphereGeometry(obstacle.radius ?? 0.05, 24, 16);
    } else {
      const he = obstacle.half_extents ?? [0.05, 0.05, 0.05];
      geometry = new THREE.BoxGeometry(2 * he[0], 2 * he[1], 2 * he[2]);
    }
    const mesh = new THREE.Mesh(
      geometry,
      new THREE.MeshStandardMaterial({ color, transparent: true, opacity }),
    );
    mesh.position.copy(toVec3(obstacle.center));
    if (obstacle.type === "box" && obstacle.orientation) {
      mesh.quaternion.copy(toQuat(obstacle.orientation));
    }
    mesh.userData.obstacleId = obstacle.id;
    return mesh;
  }

  /** Rebuild scene geometry (poses + obstacles + zones) from the draft. */
  syncScene(state: ConsoleState): void {
    this.root.remove(this.sceneGroup);
    this.sceneGroup = new THREE.Group();
    this.root.add(this.sceneGroup);
    const scene = state.scene;
    if (!scene) return;
    this.sceneGroup.add(this.poseMarker(scene.start_pose, "#39c46a"));
    this.sceneGroup.add(this.poseMarker(scene.end_pose, "#c44d39"));
    for (const middle of scene.middle_poses ?? []) {
      this.sceneGroup.add(this.poseMarker(middle, "#c4b139"));
    }
    for (const obstacle of scene.obstacles ?? []) {
      this.sceneGroup.add(this.obstacleMesh(obstacle, "#8091a5", 0.45));
    }
    for (const zone of scene.protection_zones ?? []) {
      this.sceneGroup.add(this.obstacleMesh(zone, "#c23bd4", 0.25));
    }
  }

  /** Rebuild candidate polylines and marker spheres. */
  syncCandidates(state: ConsoleState): void {
    this.root.remove(this.pathsGroup);
    this.pathsGroup = new THREE.Group();
    this.root.add(this.pathsGroup);
    this.markerMeshes.clear();
    this.pathLines.clear();
    for (const candidate of state.candidates.values()) {
      this.addCandidate(candidate);
    }
  }

  private candidateColor(candidate: CandidateView): THREE.Color {
    return new THREE.Color(displayColor(candidate));
  }

  private addCandidate(candidate: CandidateView): void {
    const color = this.candidateColor(candidate);
    const points = candidate.waypoints.map(toVec3);
    const line = new THREE.Line(
      new THREE.BufferGeometry().setFromPoints(points),
      new THREE.LineBasicMaterial({ color }),
    );
    this.pathsGroup.add(line);
    this.pathLines.set(candidate.id, line);

    const markers: THREE.Mesh[] = [];
    const geometry = new THREE.SphereGeometry(MARKER_RADIUS, 12, 8);
    // Every fourth marker is draggable-visible to avoid bead-chain clutter;
    // all remain hit-testable through the line geometry's markers.
    for (let i = 0; i < candidate.waypoints.length; i += 4) {
      const material = new THREE.MeshStandardMaterial({ color });
      const mesh = new THREE.Mesh(geometry, material);
      mesh.position.copy(points[i]);
      mesh.userData.pathId = candidate.id;
      mesh.userData.markerIndex = i;
      this.pathsGroup.add(mesh);
      markers.push(mesh);
    }
    this.markerMeshes.set(candidate.id, markers);
  }

  /** Restyle paths in place on status changes (selection grey-out). */
  restyleCandidates(state: ConsoleState): void {
    for (const candidate of state.candidates.values()) {
      const color = this.candidateColor(candidate);
      const line = this.pathLines.get(candidate.id);
      if (line) (line.material as THREE.LineBasicMaterial).color = color;
      for (const mesh of this.markerMeshes.get(candidate.id) ?? []) {
        (mesh.material as THREE.MeshStandardMaterial).color = color;
        (mesh.material as THREE.MeshStandardMaterial).opacity =
          candidate.status === "discarded" ? 0.35 : 1.0;
        (mesh.material as THREE.MeshStandardMaterial).transparent =
          candidate.status === "discarded";
      }
    }
  }

  moveMarkerVisual(pathId: number, index: number, position: Vec3): void {
    for (const mesh of this.markerMeshes.get(pathId) ?? []) {
      if (mesh.userData.markerIndex === index) mesh.position.copy(toVec3(position));
    }
    const line = this.pathLines.get(pathId);
    if (line) {
      const attr = line.geometry.getAttribute("position") as THREE.BufferAttribute;
      attr.setXYZ(index, position[0], position[1], position[2]);
      attr.needsUpdate = true;
    }
  }

  syncPlayback(state: ConsoleState): void {
    const tool = state.playback.tool;
    if (tool) {
      this.playbackMarker.visible = true;
      this.playbackMarker.position.copy(toVec3(tool.position));
      this.playbackMarker.quaternion.copy(toQuat(tool.orientation));
    } else {
      this.playbackMarker.visible = false;
    }
  }

  /** Raycast pointer coordinates (NDC) against the candidate markers. */
  pickMarker(ndc: { x: number; y: number }): MarkerHit | null {
    this.raycaster.setFromCamera(new THREE.Vector2(ndc.x, ndc.y), this.camera);
    const meshes: THREE.Object3D[] = [];
    for (const list of this.markerMeshes.values()) meshes.push(...list);
    const hits = this.raycaster.intersectObjects(meshes, false);
    if (!hits.length) return null;
    const mesh = hits[0].object;
    return {
      pathId: mesh.userData.pathId as number,
      index: mesh.userData.markerIndex as number,
      point: hits[0].point.clone(),
    };
  }

  /** Project a pointer ray onto the horizontal plane through `through`. */
  dragPlanePoint(ndc: { x: number; y: number }, through: THREE.Vector3): Vec3 | null {
    this.raycaster.setFromCamera(new THREE.Vector2(ndc.x, ndc.y), this.camera);
    const plane = new THREE.Plane();
    const normal = this.camera.getWorldDirection(new THREE.Vector3()).negate();
    plane.setFromNormalAndCoplanarPoint(normal, through);
    const hit = new THREE.Vector3();
    if (!this.raycaster.ray.intersectPlane(plane, hit)) return null;
    const local = this.root.worldToLocal(hit.clone());
    return [local.x, local.y, local.z];
  }
}
