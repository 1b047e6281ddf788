/** Slice painting: windowed image, per-surface contour polylines, and
 * pending nudge markers.  Drawing goes through a minimal context interface
 * so the routines are testable without a browser canvas.
 */
import { CanvasView, pixelToCanvas } from "./transforms.js";
import { PendingPoint } from "./state.js";
import { Contour } from "./types.js";

/** The subset of CanvasRenderingContext2D the renderer uses.  The style
 * properties accept any canvas style value; the renderer only sets
 * strings. */
export interface Draw2D {
  fillStyle: unknown;
  strokeStyle: unknown;
  lineWidth: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
}

/** Stable contour palette keyed by (object, surface). */
export function surfaceColor(object: number, surface: number): string {
  const palette = ["#3da5ff", "#ffd23d", "#4fe07a", "#ff6d6d",
                   "#c77dff", "#5de0d8", "#ffa94d", "#f06ec2"];
  return palette[(object * 2 + surface) % palette.length];
}

export function decodePixels(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Paint the slice as zoomed gray rectangles (no ImageData dependency). */
export function renderImage(ctx: Draw2D, pixels: Uint8Array,
                            shape: number[], view: CanvasView): void {
  const [rows, cols] = shape;
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const v = pixels[r * cols + c];
      ctx.fillStyle = `rgb(${v},${v},${v})`;
      const [x, y] = pixelToCanvas(view, [r, c]);
      ctx.fillRect(x, y, view.zoom, view.zoom);
    }
  }
}

/** One closed polyline per non-empty contour; returns how many were drawn. */
export function renderContours(ctx: Draw2D, contours: Contour[],
                               view: CanvasView): number {
  let drawn = 0;
  for (const contour of contours) {
    if (contour.points_px.length === 0) continue;
    ctx.strokeStyle = surfaceColor(contour.object, contour.surface);
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    contour.points_px.forEach((p, i) => {
      const [x, y] = pixelToCanvas(view, [p[0], p[1]]);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    if (contour.points_px.length > 2) ctx.closePath();
    ctx.stroke();
    drawn++;
  }
  return drawn;
}

export function renderPending(ctx: Draw2D, pending: PendingPoint[],
                              view: CanvasView): void {
  ctx.fillStyle = "#ff3b3b";
  for (const p of pending) {
    const [x, y] = pixelToCanvas(view, p.px);
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}
