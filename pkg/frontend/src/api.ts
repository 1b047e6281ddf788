/** Thin typed client over the session service endpoints.
 *
 * The fetch function is injected so tests can substitute a scripted server.
 */
import { NudgeRequest, NudgeResponse, SessionInfo, SlicePayload,
         UndoResponse } from "./types.js";

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(public status: number, public code: string,
              public stage: string, message: string) {
    super(message);
  }
}

async function unwrap<T>(resp: { ok: boolean; status: number;
                                 json(): Promise<unknown> }): Promise<T> {
  const body = (await resp.json()) as Record<string, unknown>;
  if (!resp.ok) {
    throw new ApiError(resp.status, String(body.code ?? "unknown"),
                       String(body.stage ?? "unknown"),
                       String(body.message ?? "request failed"));
  }
  return body as T;
}

export class Client {
  constructor(private base: string, private fetchFn: FetchLike) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(this.base + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => unwrap<T>(r));
  }

  createSession(volume: string, mode = "gradient",
                extra: Record<string, unknown> = {}): Promise<SessionInfo> {
    return this.post("/sessions", { volume, mode, ...extra });
  }

  getSlice(sid: string, axis: string, index: number): Promise<SlicePayload> {
    return this.fetchFn(
      `${this.base}/sessions/${sid}/slice?axis=${axis}&index=${index}`)
      .then((r) => unwrap<SlicePayload>(r));
  }

  nudge(sid: string, req: NudgeRequest): Promise<NudgeResponse> {
    return this.post(`/sessions/${sid}/nudge`, req);
  }

  undo(sid: string, axis: string, index: number): Promise<UndoResponse> {
    return this.post(`/sessions/${sid}/undo`, { axis, index });
  }

  exportSurfaces(sid: string, outDir: string): Promise<{ files: string[] }> {
    return this.post(`/sessions/${sid}/export`, { out_dir: outDir });
  }

  status(sid: string): Promise<Record<string, unknown>> {
    return this.fetchFn(`${this.base}/sessions/${sid}/status`)
      .then((r) => unwrap<Record<string, unknown>>(r));
  }
}
