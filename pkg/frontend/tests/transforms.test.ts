import { describe, expect, it } from "vitest";

import { CanvasView, SliceGeometry, canvasToPixel, canvasToWorld,
         inplaneAxes, pixelToCanvas, pixelToWorld, worldToPixel } from
  "../src/transforms.js";

const GEO: SliceGeometry = {
  axis: 2, index: 17,
  spacing: [0.5, 0.5, 0.5],
  origin: [0, 0, 0],
};

const ANISO: SliceGeometry = {
  axis: 1, index: 5,
  spacing: [0.7, 1.2, 0.4],
  origin: [-3.0, 2.5, 10.0],
};

describe("pixel/world transforms", () => {
  it("round-trips within half a voxel", () => {
    for (const geo of [GEO, ANISO]) {
      for (const px of [[0, 0], [12.3, 40.7], [63, 1.5]] as
             [number, number][]) {
        const world = pixelToWorld(geo, px);
        const back = worldToPixel(geo, world);
        const [a0, a1] = inplaneAxes(geo.axis);
        expect(Math.abs(back[0] - px[0]) * geo.spacing[a0])
          .toBeLessThan(0.5 * geo.spacing[a0]);
        expect(Math.abs(back[1] - px[1]) * geo.spacing[a1])
          .toBeLessThan(0.5 * geo.spacing[a1]);
        // exact for float round-trips, actually
        expect(back[0]).toBeCloseTo(px[0], 9);
        expect(back[1]).toBeCloseTo(px[1], 9);
      }
    }
  });

  it("puts the world point on the slice plane", () => {
    const world = pixelToWorld(ANISO, [3, 4]);
    expect(world[1]).toBeCloseTo(2.5 + 5 * 1.2, 12);
  });

  it("maps pixel steps to spacing-sized world steps", () => {
    const a = pixelToWorld(ANISO, [0, 0]);
    const b = pixelToWorld(ANISO, [1, 1]);
    expect(b[0] - a[0]).toBeCloseTo(0.7, 12);   // in-plane axis 0 = x
    expect(b[2] - a[2]).toBeCloseTo(0.4, 12);   // in-plane axis 1 = z
  });
});

describe("canvas transforms", () => {
  const view: CanvasView = { zoom: 4, panX: 10, panY: -6 };

  it("round-trips canvas <-> pixel", () => {
    const xy = pixelToCanvas(view, [7.5, 3.25]);
    const back = canvasToPixel(view, xy);
    expect(back[0]).toBeCloseTo(7.5, 9);
    expect(back[1]).toBeCloseTo(3.25, 9);
  });

  it("scales contour coordinates linearly with zoom", () => {
    const v1: CanvasView = { zoom: 2, panX: 0, panY: 0 };
    const v2: CanvasView = { zoom: 4, panX: 0, panY: 0 };
    const a = pixelToCanvas(v1, [5, 9]);
    const b = pixelToCanvas(v2, [5, 9]);
    expect(b[0]).toBeCloseTo(2 * a[0], 12);
    expect(b[1]).toBeCloseTo(2 * a[1], 12);
  });

  it("composes canvas -> world through the slice plane", () => {
    const world = canvasToWorld(GEO, view, [10 + 4 * 8, -6 + 4 * 2]);
    // canvas x maps to columns (in-plane axis 1), y to rows (axis 0)
    expect(world[0]).toBeCloseTo(2 * 0.5, 9);
    expect(world[1]).toBeCloseTo(8 * 0.5, 9);
    expect(world[2]).toBeCloseTo(17 * 0.5, 9);
  });
});
