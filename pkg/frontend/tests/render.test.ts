import { describe, expect, it } from "vitest";

import { Draw2D, decodePixels, renderContours, renderImage, renderPending,
         surfaceColor } from "../src/render.js";
import { Contour } from "../src/types.js";

/** Records every draw call for assertions. */
class Recorder implements Draw2D {
  fillStyle = "";
  strokeStyle = "";
  lineWidth = 0;
  calls: Array<[string, ...number[]]> = [];
  strokes: Array<{ color: string; points: [number, number][] }> = [];
  private path: [number, number][] = [];

  fillRect(x: number, y: number, w: number, h: number): void {
    this.calls.push(["fillRect", x, y, w, h]);
  }
  beginPath(): void { this.path = []; }
  moveTo(x: number, y: number): void { this.path.push([x, y]); }
  lineTo(x: number, y: number): void { this.path.push([x, y]); }
  closePath(): void { /* shape already captured */ }
  stroke(): void {
    this.strokes.push({ color: this.strokeStyle, points: [...this.path] });
  }
  arc(x: number, y: number, r: number, _a0: number, _a1: number): void {
    this.calls.push(["arc", x, y, r]);
  }
  fill(): void { this.calls.push(["fill"]); }
}

const VIEW = { zoom: 2, panX: 0, panY: 0 };

function contour(object: number, surface: number,
                 px: number[][]): Contour {
  return { object, surface, points_px: px,
           points_world: px.map(() => [0, 0, 0]) };
}

describe("renderContours", () => {
  it("draws one polyline per surface with stable distinct colors", () => {
    const rec = new Recorder();
    const n = renderContours(rec, [
      contour(0, 0, [[0, 0], [0, 4], [4, 4]]),
      contour(0, 1, [[1, 1], [1, 5], [5, 5]]),
    ], VIEW);
    expect(n).toBe(2);
    expect(rec.strokes).toHaveLength(2);
    expect(rec.strokes[0].color).toBe(surfaceColor(0, 0));
    expect(rec.strokes[1].color).toBe(surfaceColor(0, 1));
    expect(rec.strokes[0].color).not.toBe(rec.strokes[1].color);
  });

  it("skips empty contours without crashing", () => {
    const rec = new Recorder();
    const n = renderContours(rec, [contour(0, 0, []), contour(1, 1, [])],
                             VIEW);
    expect(n).toBe(0);
    expect(rec.strokes).toHaveLength(0);
  });

  it("scales stroke coordinates by the zoom factor", () => {
    const a = new Recorder();
    const b = new Recorder();
    const c = [contour(0, 0, [[1, 2], [3, 4]])];
    renderContours(a, c, { zoom: 2, panX: 0, panY: 0 });
    renderContours(b, c, { zoom: 4, panX: 0, panY: 0 });
    for (let i = 0; i < a.strokes[0].points.length; i++) {
      expect(b.strokes[0].points[i][0])
        .toBeCloseTo(2 * a.strokes[0].points[i][0], 12);
      expect(b.strokes[0].points[i][1])
        .toBeCloseTo(2 * a.strokes[0].points[i][1], 12);
    }
  });
});

describe("renderImage", () => {
  it("paints one zoomed cell per pixel with its gray value", () => {
    const rec = new Recorder();
    const pixels = new Uint8Array([0, 128, 255, 64]);
    renderImage(rec, pixels, [2, 2], VIEW);
    expect(rec.calls.filter(([op]) => op === "fillRect")).toHaveLength(4);
    // last cell: row 1, col 1 -> canvas (2, 2) at zoom 2
    expect(rec.calls[3]).toEqual(["fillRect", 2, 2, 2, 2]);
  });
});

describe("renderPending", () => {
  it("draws one marker per pending point", () => {
    const rec = new Recorder();
    renderPending(rec, [
      { px: [1, 1], world: [0, 0, 0] },
      { px: [2, 3], world: [0, 0, 0] },
    ], VIEW);
    expect(rec.calls.filter(([op]) => op === "arc")).toHaveLength(2);
  });
});

describe("decodePixels", () => {
  it("inverts base64 of raw bytes", () => {
    const raw = new Uint8Array([0, 1, 2, 250, 255]);
    const b64 = btoa(String.fromCharCode(...raw));
    expect(Array.from(decodePixels(b64))).toEqual(Array.from(raw));
  });
});
