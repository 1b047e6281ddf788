/** Client-side session state: pending nudge points, edit sequence tracking,
 * and the idle -> drawing -> submitting -> idle interaction machine.
 *
 * The server serializes mutations per session; the client mirrors that by
 * allowing at most one in-flight submission and rejecting input meanwhile.
 */
import { Contour, SlicePayload } from "./types.js";

export type Phase = "idle" | "drawing" | "submitting";

export interface PendingPoint {
  px: [number, number];              // fractional [row, col]
  world: [number, number, number];   // mm, on the current slice plane
}

export class ViewState {
  phase: Phase = "idle";
  axis = "z";
  sliceIndex = 0;
  targetSurface = 0;                 // row into the session's surface list
  zoom = 4;
  panX = 0;
  panY = 0;
  sequence = 0;
  pending: PendingPoint[] = [];
  contours: Contour[] = [];
  lastResolveMs: number | null = null;
  slice: SlicePayload | null = null;

  /** Install a freshly fetched slice; drops pending points (they are only
   * meaningful on the slice they were drawn on). */
  setSlice(payload: SlicePayload): void {
    if (this.phase === "submitting") {
      throw new Error("cannot change slice while a nudge is in flight");
    }
    this.slice = payload;
    this.axis = payload.axis;
    this.sliceIndex = payload.index;
    this.contours = payload.contours;
    this.sequence = payload.sequence;
    this.pending = [];
    this.phase = "idle";
  }

  addPoint(point: PendingPoint): void {
    if (this.phase === "submitting") return;   // single writer
    this.pending.push(point);
    this.phase = "drawing";
  }

  /** Transition into submitting; returns false when there is nothing to
   * submit or a submission is already in flight. */
  beginSubmit(): boolean {
    if (this.phase !== "drawing" || this.pending.length === 0) return false;
    this.phase = "submitting";
    return true;
  }

  /** Successful nudge: contours replaced, pending cleared, latency shown. */
  completeSubmit(sequence: number, contours: Contour[],
                 resolveMs: number): void {
    if (this.phase !== "submitting") throw new Error("no submission in flight");
    if (sequence <= this.sequence) {
      throw new Error(`stale sequence ${sequence} (have ${this.sequence})`);
    }
    this.sequence = sequence;
    this.contours = contours;
    this.lastResolveMs = resolveMs;
    this.pending = [];
    this.phase = "idle";
  }

  /** Failed nudge: keep the points so the user can retry or adjust. */
  failSubmit(): void {
    if (this.phase !== "submitting") throw new Error("no submission in flight");
    this.phase = "drawing";
  }

  clearPending(): void {
    if (this.phase === "submitting") return;
    this.pending = [];
    this.phase = "idle";
  }

  applyUndo(sequence: number, contours: Contour[] | undefined): void {
    if (this.phase === "submitting") {
      throw new Error("cannot undo while a nudge is in flight");
    }
    this.sequence = sequence;
    if (contours) this.contours = contours;
    this.pending = [];
    this.phase = "idle";
  }
}
