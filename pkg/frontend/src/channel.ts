/**
 * The per-session message channel: server push in, marker updates out.
 *
 * The WebSocket constructor is injectable so the same client runs in the
 * browser (native WebSocket) and in node tests (the `ws` package). While
 * disconnected, outbound sends report failure so drag sources can drop
 * updates; reconnect attempts run on a backoff and fire a handler the
 * controller uses to resync from the session snapshot.
 */

import { parseServerMessage, type MarkerUpdateMessage, type ServerMessage } from "./protocol.js";

interface WebSocketLike {
  readyState: number;
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (event: any) => void): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

const OPEN = 1;

export interface ChannelHandlers {
  onMessage: (message: ServerMessage) => void;
  onOpen?: () => void;
  onReconnect?: () => void;
  onClose?: () => void;
}

export class Channel {
  private socket: WebSocketLike | null = null;
  private closed = false;
  private everConnected = false;
  private retryMs = 250;
  dropped = 0;

  constructor(
    private readonly url: string,
    private readonly handlers: ChannelHandlers,
    private readonly factory: WebSocketFactory = (u) => new WebSocket(u) as unknown as WebSocketLike,
    private readonly reconnect: boolean = true,
  ) {}

  open(): Promise<void> {
    return new Promise((resolve, reject) => {
      let settled = false;
      const socket = this.factory(this.url);
      this.socket = socket;
      socket.addEventListener("open", () => {
        this.retryMs = 250;
        const wasConnected = this.everConnected;
        this.everConnected = true;
        if (!settled) {
          settled = true;
          resolve();
        }
        if (wasConnected) this.handlers.onReconnect?.();
        else this.handlers.onOpen?.();
      });
      socket.addEventListener("message", (event: { data: unknown }) => {
        const message = parseServerMessage(event.data as string);
        if (message) this.handlers.onMessage(message);
      });
      socket.addEventListener("error", () => {
        if (!settled) {
          settled = true;
          reject(new Error(`channel failed to open: ${this.url}`));
        }
      });
      socket.addEventListener("close", () => {
        this.socket = null;
        this.handlers.onClose?.();
        if (!this.closed && this.reconnect && this.everConnected) {
          setTimeout(() => {
            if (!this.closed) this.open().catch(() => undefined);
          }, this.retryMs);
          this.retryMs = Math.min(this.retryMs * 2, 5000);
        }
      });
    });
  }

  get isOpen(): boolean {
    return this.socket !== null && this.socket.readyState === OPEN;
  }

  /** Send one marker update; false (and counted) when disconnected. */
  sendMarkerUpdate(update: MarkerUpdateMessage): boolean {
    if (!this.isOpen) {
      this.dropped += 1;
      return false;
    }
    this.socket!.send(JSON.stringify(update));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
