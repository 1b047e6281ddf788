/** The interaction controller: wires state, API client, and renderer.
 *
 * DOM-free by construction — the browser entry point (app.ts) passes in a
 * real canvas context and status callbacks; tests pass recorders and a
 * scripted fetch.
 */
import { Client } from "./api.js";
import { Draw2D, renderContours, renderImage, renderPending,
         decodePixels } from "./render.js";
import { ViewState } from "./state.js";
import { AXES, SliceGeometry, canvasToPixel, pixelToWorld } from
  "./transforms.js";
import { SessionInfo } from "./types.js";

export interface EditorHooks {
  onLatency?(ms: number): void;
  onStatus?(message: string): void;
}

export class SliceEditor {
  state = new ViewState();
  session: SessionInfo | null = null;

  constructor(private client: Client, private ctx: Draw2D | null = null,
              private hooks: EditorHooks = {}) {}

  private status(msg: string): void {
    this.hooks.onStatus?.(msg);
  }

  geometry(): SliceGeometry {
    const s = this.state.slice;
    if (!s || !this.session) throw new Error("no slice loaded");
    return { axis: AXES[s.axis], index: s.index,
             spacing: this.session.spacing, origin: this.session.origin };
  }

  async open(volume: string, mode = "gradient",
             extra: Record<string, unknown> = {}): Promise<void> {
    this.session = await this.client.createSession(volume, mode, extra);
    this.state.sliceIndex = Math.floor(this.session.dims[2] / 2);
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.session) throw new Error("no session");
    const payload = await this.client.getSlice(
      this.session.id, this.state.axis, this.state.sliceIndex);
    this.state.setSlice(payload);
    this.render();
  }

  render(): void {
    if (!this.ctx || !this.state.slice) return;
    const view = { zoom: this.state.zoom, panX: this.state.panX,
                   panY: this.state.panY };
    renderImage(this.ctx, decodePixels(this.state.slice.pixels_b64),
                this.state.slice.shape, view);
    renderContours(this.ctx, this.state.contours, view);
    renderPending(this.ctx, this.state.pending, view);
  }

  /** A canvas click adds a pending nudge point on the current slice. */
  click(canvasX: number, canvasY: number): void {
    if (!this.state.slice) return;
    const view = { zoom: this.state.zoom, panX: this.state.panX,
                   panY: this.state.panY };
    const px = canvasToPixel(view, [canvasX, canvasY]);
    const world = pixelToWorld(this.geometry(), px);
    this.state.addPoint({ px, world });
    this.render();
  }

  async submit(): Promise<boolean> {
    const s = this.state;
    if (!this.session || !s.slice || !s.beginSubmit()) return false;
    const target = this.session.surfaces[s.targetSurface];
    try {
      const resp = await this.client.nudge(this.session.id, {
        object_id: target.object,
        surface_id: target.surface,
        axis: s.axis,
        slice_index: s.sliceIndex,
        points: s.pending.map((p) => [...p.world]),
      });
      s.completeSubmit(resp.sequence, resp.contours, resp.resolve_ms);
      this.hooks.onLatency?.(resp.resolve_ms);
      this.status(`resolved in ${resp.resolve_ms.toFixed(1)} ms, ` +
                  `${resp.edits} cost edits`);
      this.render();
      return true;
    } catch (err) {
      s.failSubmit();                 // keep the points for retry
      this.status(`nudge failed: ${(err as Error).message}`);
      return false;
    }
  }

  async undo(): Promise<boolean> {
    const s = this.state;
    if (!this.session || s.phase === "submitting") return false;
    try {
      const resp = await this.client.undo(this.session.id, s.axis,
                                          s.sliceIndex);
      s.applyUndo(resp.sequence, resp.contours);
      this.status(`undid edit ${resp.undone_seq}`);
      this.render();
      return true;
    } catch (err) {
      this.status(`undo failed: ${(err as Error).message}`);
      return false;
    }
  }

  async changeSlice(delta: number): Promise<void> {
    if (!this.session || this.state.phase === "submitting") return;
    const max = this.session.dims[AXES[this.state.axis]] - 1;
    const next = Math.min(max, Math.max(0, this.state.sliceIndex + delta));
    if (next === this.state.sliceIndex) return;
    this.state.sliceIndex = next;
    await this.refresh();
  }

  /** Arrows change slice, digits pick the target surface, Z undoes. */
  async handleKey(key: string): Promise<void> {
    if (key === "ArrowUp" || key === "ArrowRight") await this.changeSlice(1);
    else if (key === "ArrowDown" || key === "ArrowLeft") {
      await this.changeSlice(-1);
    } else if (key.toLowerCase() === "z") await this.undo();
    else if (/^[1-9]$/.test(key) && this.session) {
      const row = Number(key) - 1;
      if (row < this.session.surfaces.length) {
        this.state.targetSurface = row;
        const t = this.session.surfaces[row];
        this.status(`target surface: object ${t.object} surface ${t.surface}`);
      }
    } else if (key === "Enter") await this.submit();
    else if (key === "Escape") {
      this.state.clearPending();
      this.render();
    }
  }
}
