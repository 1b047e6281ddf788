/** Payload shapes of the session service (mirrored from the HTTP API). */

export interface SurfaceInfo {
  object: number;
  surface: number;
  columns: number;
}

export interface SessionInfo {
  id: string;
  sequence: number;
  objective: number;
  dims: number[];
  spacing: number[];
  origin: number[];
  surfaces: SurfaceInfo[];
}

export interface Contour {
  object: number;
  surface: number;
  /** (K, 3) world mm points on the slice plane, angularly ordered. */
  points_world: number[][];
  /** (K, 2) fractional pixel coordinates along the in-plane axes. */
  points_px: number[][];
}

export interface SlicePayload {
  axis: string;
  index: number;
  plane_mm: number;
  /** [rows, cols] of the slice image (in-plane axis order). */
  shape: number[];
  inplane_axes: string[];
  spacing: number[];
  origin: number[];
  dims: number[];
  window: number[];
  /** base64 raw uint8, row-major, already windowed. */
  pixels_b64: string;
  contours: Contour[];
  sequence: number;
}

export interface NudgeRequest {
  object_id: number;
  surface_id: number;
  axis: string;
  slice_index: number;
  /** (K, 3) world mm points, all on the slice plane. */
  points: number[][];
  delta?: number;
}

export interface NudgeResponse {
  sequence: number;
  objective: number;
  objective_delta: number;
  resolve_ms: number;
  edits: number;
  contours: Contour[];
}

export interface UndoResponse {
  sequence: number;
  objective: number;
  undone_seq: number;
  contours?: Contour[];
}

export interface ServiceErrorBody {
  code: string;
  stage: string;
  message: string;
}
