/** Coordinate transforms between world mm, slice pixels, and canvas pixels.
 *
 * A slice payload carries the volume spacing/origin and the two in-plane
 * axis indices; pixel row/col i maps to world origin[a] + i * spacing[a]
 * along in-plane axis a.  The canvas adds zoom and pan on top, with
 * canvas x = columns (second in-plane axis) and canvas y = rows.
 */

export const AXES: Record<string, number> = { x: 0, y: 1, z: 2 };

export interface SliceGeometry {
  axis: number;          // sliced axis index 0..2
  index: number;         // slice number along that axis
  spacing: number[];     // per-axis voxel size, mm
  origin: number[];      // world position of voxel (0,0,0), mm
}

export interface CanvasView {
  zoom: number;
  panX: number;
  panY: number;
}

export function inplaneAxes(axis: number): [number, number] {
  const rest = [0, 1, 2].filter((a) => a !== axis);
  return [rest[0], rest[1]];
}

/** Fractional pixel [row, col] -> world mm point on the slice plane. */
export function pixelToWorld(geo: SliceGeometry, px: [number, number]):
    [number, number, number] {
  const [a0, a1] = inplaneAxes(geo.axis);
  const world: [number, number, number] = [0, 0, 0];
  world[geo.axis] = geo.origin[geo.axis] + geo.index * geo.spacing[geo.axis];
  world[a0] = geo.origin[a0] + px[0] * geo.spacing[a0];
  world[a1] = geo.origin[a1] + px[1] * geo.spacing[a1];
  return world;
}

/** World mm point -> fractional pixel [row, col] on the slice plane. */
export function worldToPixel(geo: SliceGeometry,
                             world: number[]): [number, number] {
  const [a0, a1] = inplaneAxes(geo.axis);
  return [(world[a0] - geo.origin[a0]) / geo.spacing[a0],
          (world[a1] - geo.origin[a1]) / geo.spacing[a1]];
}

/** Fractional pixel [row, col] -> canvas [x, y] under zoom/pan. */
export function pixelToCanvas(view: CanvasView,
                              px: [number, number]): [number, number] {
  return [px[1] * view.zoom + view.panX, px[0] * view.zoom + view.panY];
}

/** Canvas [x, y] -> fractional pixel [row, col]. */
export function canvasToPixel(view: CanvasView,
                              xy: [number, number]): [number, number] {
  return [(xy[1] - view.panY) / view.zoom, (xy[0] - view.panX) / view.zoom];
}

/** Canvas click -> world mm point on the current slice. */
export function canvasToWorld(geo: SliceGeometry, view: CanvasView,
                              xy: [number, number]): [number, number, number] {
  return pixelToWorld(geo, canvasToPixel(view, xy));
}
