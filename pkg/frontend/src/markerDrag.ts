/**
 * Turn a pointer drag on a path marker into a sequence-numbered stream of
 * marker updates, throttled to the selection-loop cadence (60 Hz default).
 *
 * Sequence numbers increase monotonically across every gesture on the
 * channel; positions sampled faster than the cadence collapse to the most
 * recent one (a trailing send keeps the final position). Updates against
 * anything but a live selection phase, or while disconnected, are dropped.
 */

import type { Channel } from "./channel.js";
import type { Vec3 } from "./protocol.js";
import type { ConsoleState } from "./state.js";
import { canDragMarkers } from "./state.js";

export interface DragGesture {
  move(position: Vec3): void;
  end(): void;
}

export class MarkerDragSource {
  private seq = 0;
  sent = 0;

  constructor(
    private readonly channel: Channel,
    private readonly getState: () => ConsoleState,
    private readonly cadenceHz: number = 60,
    private readonly now: () => number = () => performance.now(),
    private readonly schedule: (fn: () => void, ms: number) => unknown = (fn, ms) =>
      setTimeout(fn, ms),
  ) {}

  private get periodMs(): number {
    return 1000 / this.cadenceHz;
  }

  private eligible(pathId: number): boolean {
    const state = this.getState();
    if (!canDragMarkers(state)) return false;
    const path = state.candidates.get(pathId);
    if (!path) return false;
    // Discarded/executed paths no longer react to drags.
    return path.status === "proposed" || path.status === "selected";
  }

  private emit(pathId: number, marker: number, position: Vec3): void {
    if (!this.eligible(pathId)) return;
    const ok = this.channel.sendMarkerUpdate({
      type: "marker_update",
      path_id: pathId,
      marker,
      position,
      seq: this.seq,
    });
    if (ok) {
      this.seq += 1;
      this.sent += 1;
    }
  }

  begin(pathId: number, marker: number): DragGesture {
    let lastSent = -Infinity;
    let pending: Vec3 | null = null;
    let trailerArmed = false;

    const flush = (position: Vec3) => {
      lastSent = this.now();
      this.emit(pathId, marker, position);
    };

    const armTrailer = () => {
      if (trailerArmed) return;
      trailerArmed = true;
      const wait = Math.max(0, this.periodMs - (this.now() - lastSent));
      this.schedule(() => {
        trailerArmed = false;
        if (pending) {
          const position = pending;
          pending = null;
          flush(position);
        }
      }, wait);
    };

    return {
      move: (position: Vec3) => {
        if (this.now() - lastSent >= this.periodMs) {
          pending = null;
          flush(position);
        } else {
          pending = position;
          armTrailer();
        }
      },
      end: () => {
        if (pending) {
          const position = pending;
          pending = null;
          flush(position);
        }
      },
    };
  }
}
