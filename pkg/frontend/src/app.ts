/**
 * ConsoleController: the DOM-free core of the operator console.
 *
 * Owns the store, the REST api, and the push channel; exposes the operator
 * verbs (author scene, plan, drag markers, confirm) and keeps the store in
 * sync with server push. Runs identically in the browser and in node tests
 * (fetch and WebSocket are injected).
 */

import { ServiceApi, type FetchLike } from "./api.js";
import { Channel, type WebSocketFactory } from "./channel.js";
import { MarkerDragSource } from "./markerDrag.js";
import type { SceneJson } from "./protocol.js";
import { canEditScene, ConsoleStore, type ConsoleState } from "./state.js";

export interface ControllerOptions {
  baseUrl: string;
  fetchImpl?: FetchLike;
  webSocketFactory?: WebSocketFactory;
  sceneDebounceMs?: number;
  cadenceHz?: number;
  now?: () => number;
  reconnect?: boolean;
}

export class ConsoleController {
  readonly store = new ConsoleStore();
  readonly api: ServiceApi;
  private channel: Channel | null = null;
  private drags: MarkerDragSource | null = null;
  private readonly options: ControllerOptions;
  private sceneUploadTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(options: ControllerOptions) {
    this.options = options;
    this.api = new ServiceApi(options.baseUrl, options.fetchImpl);
  }

  get state(): ConsoleState {
    return this.store.state;
  }

  private wsUrl(sessionId: string): string {
    return (
      this.options.baseUrl.replace(/^http/, "ws") + `/sessions/${sessionId}/channel`
    );
  }

  /** Create a session and open its push channel. */
  async connect(): Promise<string> {
    const sessionId = await this.api.createSession();
    const channel = new Channel(
      this.wsUrl(sessionId),
      {
        onMessage: (message) => this.store.apply(message),
        onClose: () => this.store.disconnected(),
        onReconnect: () => {
          this.store.connected(sessionId);
          void this.resync();
        },
      },
      this.options.webSocketFactory,
      this.options.reconnect ?? true,
    );
    await channel.open();
    this.channel = channel;
    this.drags = new MarkerDragSource(
      channel,
      () => this.state,
      this.options.cadenceHz ?? 60,
      this.options.now,
    );
    this.store.connected(sessionId);
    return sessionId;
  }

  /** Re-pull the session snapshot after a channel reconnect. */
  async resync(): Promise<void> {
    if (!this.state.sessionId) return;
    const info = await this.api.sessionInfo(this.state.sessionId);
    this.store.resync(info);
  }

  /**
   * Apply a local scene edit. The upload is debounced so a live gizmo drag
   * becomes one put_scene, and the draft flag holds until the ack lands.
   */
  editScene(scene: SceneJson): void {
    if (!canEditScene(this.state)) {
      throw new Error(`scene editing is disabled while ${this.state.phase}`);
    }
    this.store.sceneEdited(scene);
    const delay = this.options.sceneDebounceMs ?? 150;
    if (this.sceneUploadTimer !== null) clearTimeout(this.sceneUploadTimer);
    this.sceneUploadTimer = setTimeout(() => {
      this.sceneUploadTimer = null;
      void this.uploadScene();
    }, delay);
  }

  /** Author a scene and wait for the server ack (no debounce). */
  async authorScene(scene: SceneJson): Promise<void> {
    if (!canEditScene(this.state)) {
      throw new Error(`scene editing is disabled while ${this.state.phase}`);
    }
    this.store.sceneEdited(scene);
    await this.uploadScene();
  }

  private async uploadScene(): Promise<void> {
    const { sessionId, scene } = this.state;
    if (!sessionId || !scene) return;
    try {
      await this.api.putScene(sessionId, scene);
      this.store.sceneAcknowledged();
    } catch (error) {
      this.store.state.notices.push({
        level: "warn",
        code: "scene_rejected",
        message: String(error),
        seq: -1,
      });
    }
  }

  async plan(k?: number, baseSeed?: number): Promise<void> {
    if (!this.state.sessionId) throw new Error("not connected");
    await this.api.plan(this.state.sessionId, k, baseSeed);
    this.store.planRequested();
  }

  /** Begin a marker drag gesture; move()/end() stream throttled updates. */
  beginMarkerDrag(pathId: number, markerIndex: number) {
    if (!this.drags) throw new Error("not connected");
    return this.drags.begin(pathId, markerIndex);
  }

  async confirm(pathId?: number): Promise<void> {
    const target = pathId ?? this.state.selectedId;
    if (target === null || target === undefined) {
      throw new Error("nothing selected to confirm");
    }
    if (!this.state.sessionId) throw new Error("not connected");
    await this.api.confirm(this.state.sessionId, target);
    this.store.confirmRequested(target);
  }

  close(): void {
    this.channel?.close();
    this.channel = null;
  }
}
