"""HTTP session service for interactive surface editing.

Endpoints: POST /sessions; GET /sessions/{id}/slice?axis=&index=;
POST /sessions/{id}/nudge; POST /sessions/{id}/undo;
POST /sessions/{id}/export; GET /sessions/{id}/status.
Errors use body {code, stage, message}. Sessions live in memory with an
on-disk replay log (JSON lines) so a restarted server can reproduce the
edited surfaces deterministically.
"""
from __future__ import annotations

import base64
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import harness, jei
from .graph import ColumnGraph, GraphParams
from .learn import load_naf_model, load_rf_model
from .maxflow import FlowState, SurfaceSolution
from .mesh import write_obj
from .volume import Volume3

MODE_GRADIENT = "gradient"
MODE_LEARNED = "learned"


class ServiceError(Exception):
    def __init__(self, code: str, stage: str, message: str, status: int = 400):
        super().__init__(message)
        self.code = code
        self.stage = stage
        self.message = message
        self.status = status


@dataclass
class Session:
    session_id: str
    volume_name: str
    mode: str
    volume: Volume3
    graph: ColumnGraph
    flow: FlowState
    solution: SurfaceSolution
    kd: jei.NodeIndexKD
    history: list = field(default_factory=list)
    sequence: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    log_path: str = ""
    config_snapshot: dict = field(default_factory=dict)

    def log(self, record: dict) -> None:
        if not self.log_path:
            return
        with open(self.log_path, "a") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def _surface_contour(session: Session, s: int, axis: int,
                     index: int) -> np.ndarray:
    """Solution points of surface row ``s`` within half a voxel of the slice
    plane, ordered by polar angle in the slice plane. (K, 3) world mm."""
    g = session.graph
    obj, _surf = g.surfaces[s]
    cols = g.columns_of_object(obj)
    pts = g.nodes[cols, session.solution.x[s, cols]]
    v = session.volume
    plane = v.origin[axis] + index * v.spacing[axis]
    on = np.abs(pts[:, axis] - plane) <= 0.5 * v.spacing[axis]
    sel = pts[on]
    if len(sel) == 0:
        return sel
    inplane = [a for a in range(3) if a != axis]
    c = sel[:, inplane].mean(axis=0)
    ang = np.arctan2(sel[:, inplane[1]] - c[1], sel[:, inplane[0]] - c[0])
    return sel[np.argsort(ang, kind="stable")]


def _contours_payload(session: Session, axis: int, index: int) -> list:
    v = session.volume
    inplane = [a for a in range(3) if a != axis]
    out = []
    for s, (obj, surf) in enumerate(session.graph.surfaces):
        pts = _surface_contour(session, s, axis, index)
        px = (pts[:, inplane] - np.array(v.origin)[inplane]) \
            / np.array(v.spacing)[inplane]
        out.append({"object": int(obj), "surface": int(surf),
                    "points_world": pts.tolist(),
                    "points_px": px.tolist()})
    return out


def _slice_payload(session: Session, axis: int, index: int) -> dict:
    v = session.volume
    if not 0 <= index < v.dims[axis]:
        raise ServiceError("out-of-range", "get-slice",
                           f"slice {index} outside [0, {v.dims[axis]})", 422)
    img = np.take(v.data, index, axis=axis).astype(np.float64)
    lo, hi = float(img.min()), float(img.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img8 = np.clip((img - lo) * scale, 0, 255).astype(np.uint8)
    inplane = [a for a in range(3) if a != axis]
    return {
        "axis": "xyz"[axis],
        "index": index,
        "plane_mm": v.origin[axis] + index * v.spacing[axis],
        "shape": list(img8.shape),
        "inplane_axes": ["xyz"[a] for a in inplane],
        "spacing": list(v.spacing),
        "origin": list(v.origin),
        "dims": list(v.dims),
        "window": [lo, hi],
        "pixels_b64": base64.b64encode(np.ascontiguousarray(img8)
                                       .tobytes()).decode(),
        "contours": _contours_payload(session, axis, index),
        "sequence": session.sequence,
    }


def _build_session(data_root: str, params: GraphParams, volume_name: str,
                   mode: str, rf_model_path: str | None,
                   naf_model_path: str | None, seed: int,
                   session_id: str | None = None,
                   log: bool = True) -> Session:
    from .cli import _phantom_dir, read_phantom
    pdir = _phantom_dir(data_root, volume_name)
    if not os.path.isdir(pdir):
        raise ServiceError("not-found", "load-volume",
                           f"no phantom named {volume_name!r}", 404)
    ph = read_phantom(pdir)
    cfg = harness.ExperimentConfig(seed=seed)
    init_meshes = harness.corpus_mean_shapes([ph], cfg)
    g = harness.build_phantom_graph(ph, params, init_meshes=init_meshes)
    if mode == MODE_GRADIENT:
        costs = harness.cost_field_for_mode(harness.MODE_GRADIENT,
                                            ph.volume, g)
    elif mode == MODE_LEARNED:
        if not rf_model_path:
            raise ServiceError("failed-precondition", "load-models",
                               "learned mode requires rf_model", 412)
        full = os.path.join(data_root, rf_model_path)
        if not os.path.exists(full):
            raise ServiceError("failed-precondition", "load-models",
                               f"missing model file {rf_model_path}", 412)
        rf = load_rf_model(full)
        naf_maps = None
        hmode = harness.MODE_RF
        if naf_model_path:
            nfull = os.path.join(data_root, naf_model_path)
            if not os.path.exists(nfull):
                raise ServiceError("failed-precondition", "load-models",
                                   f"missing model file {naf_model_path}", 412)
            naf_maps = harness._naf_maps(ph, load_naf_model(nfull))
            hmode = harness.MODE_NAF_RF
        costs = harness.cost_field_for_mode(hmode, ph.volume, g, rf_model=rf,
                                            naf_maps=naf_maps)
    else:
        raise ServiceError("invalid-argument", "create-session",
                           f"unknown mode {mode!r}", 422)
    ctx = harness.segment(ph.volume, g, costs, with_kd=True)
    sid = session_id or uuid.uuid4().hex
    log_dir = os.path.join(data_root, "sessions")
    if log:
        os.makedirs(log_dir, exist_ok=True)
    session = Session(
        session_id=sid, volume_name=volume_name, mode=mode, volume=ph.volume,
        graph=g, flow=ctx.flow, solution=ctx.solution, kd=ctx.kd,
        log_path=os.path.join(log_dir, f"{sid}.log") if log else "",
        config_snapshot={"volume": volume_name, "mode": mode,
                         "rf_model": rf_model_path,
                         "naf_model": naf_model_path, "seed": seed})
    session.log({"op": "create", **session.config_snapshot})
    return session


def replay_session(data_root: str, params: GraphParams,
                   log_file: str) -> Session:
    """Rebuild a session from its replay log; deterministic."""
    with open(log_file) as f:
        records = [json.loads(line) for line in f]
    if not records or records[0].get("op") != "create":
        raise ServiceError("corrupt-log", "replay",
                           f"{log_file}: missing create record", 500)
    head = records[0]
    session = _build_session(data_root, params, head["volume"], head["mode"],
                             head.get("rf_model"), head.get("naf_model"),
                             int(head.get("seed", 0)),
                             session_id=os.path.splitext(
                                 os.path.basename(log_file))[0],
                             log=False)
    for rec in records[1:]:
        if rec["op"] == "nudge":
            nudge = jei.NudgeContour(
                object_id=rec["object_id"], surface_id=rec["surface_id"],
                axis=rec["axis"], slice_index=rec["slice_index"],
                points=np.asarray(rec["points"]))
            sol, record = jei.apply_nudge(
                session.flow, session.graph, session.kd, nudge,
                delta=rec.get("delta", 2), seq=len(session.history))
            session.history.append(record)
            session.solution = sol
            session.sequence += 1
        elif rec["op"] == "undo":
            session.solution = jei.undo(session.flow, session.history)
            session.sequence += 1
    session.log_path = log_file
    return session


def create_app(data_root: str = "data",
               graph_params: GraphParams | None = None,
               seed: int = 0) -> FastAPI:
    params = graph_params or GraphParams()
    app = FastAPI(title="surfseg session service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    app.state.sessions = sessions

    @app.exception_handler(ServiceError)
    async def _service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "stage": exc.stage,
                                     "message": exc.message})

    def get_session(sid: str) -> Session:
        with registry_lock:
            if sid not in sessions:
                raise ServiceError("not-found", "lookup",
                                   f"no session {sid}", 404)
            return sessions[sid]

    @app.post("/sessions")
    async def create_session(body: dict):
        try:
            session = _build_session(
                data_root, params, body.get("volume", ""),
                body.get("mode", MODE_GRADIENT), body.get("rf_model"),
                body.get("naf_model"), int(body.get("seed", seed)))
        except ServiceError:
            raise
        except Exception as exc:
            raise ServiceError("pipeline-failure", "initial-solve", str(exc),
                               500)
        with registry_lock:
            sessions[session.session_id] = session
        g = session.graph
        return {
            "id": session.session_id,
            "sequence": session.sequence,
            "objective": session.solution.objective,
            "dims": list(session.volume.dims),
            "spacing": list(session.volume.spacing),
            "origin": list(session.volume.origin),
            "surfaces": [{"object": int(o), "surface": int(su),
                          "columns": int(len(g.columns_of_object(o)))}
                         for o, su in g.surfaces],
        }

    @app.get("/sessions/{sid}/slice")
    async def get_slice(sid: str, axis: str, index: int):
        session = get_session(sid)
        if axis not in jei.AXES:
            raise ServiceError("invalid-argument", "get-slice",
                               f"unknown axis {axis!r}", 422)
        with session.lock:
            return _slice_payload(session, jei.AXES[axis], index)

    @app.post("/sessions/{sid}/nudge")
    async def post_nudge(sid: str, body: dict):
        session = get_session(sid)
        points = np.asarray(body.get("points", []), dtype=np.float64)
        if points.size == 0:
            raise ServiceError("invalid-argument", "nudge",
                               "nudge needs at least one point", 422)
        try:
            nudge = jei.NudgeContour(
                object_id=int(body["object_id"]),
                surface_id=int(body["surface_id"]),
                axis=body["axis"], slice_index=int(body["slice_index"]),
                points=points)
            nudge.check_plane(np.asarray(session.volume.origin),
                              np.asarray(session.volume.spacing))
        except (KeyError, ValueError) as exc:
            raise ServiceError("invalid-argument", "nudge", str(exc), 422)
        except jei.JEIError as exc:
            raise ServiceError("invalid-argument", "nudge", str(exc), 422)
        with session.lock:
            before = session.solution.objective
            t0 = time.perf_counter()
            try:
                sol, record = jei.apply_nudge(
                    session.flow, session.graph, session.kd, nudge,
                    delta=int(body.get("delta", 2)),
                    seq=len(session.history))
            except jei.NudgeMissError as exc:
                raise ServiceError("nudge-miss", "apply-nudge", str(exc), 422)
            except jei.JEIError as exc:
                raise ServiceError("jei-error", "apply-nudge", str(exc), 422)
            resolve_ms = (time.perf_counter() - t0) * 1e3
            session.history.append(record)
            session.solution = sol
            session.sequence += 1
            session.log({"op": "nudge", "object_id": nudge.object_id,
                         "surface_id": nudge.surface_id, "axis": nudge.axis,
                         "slice_index": nudge.slice_index,
                         "points": nudge.points.tolist(),
                         "delta": int(body.get("delta", 2))})
            return {
                "sequence": session.sequence,
                "objective": sol.objective,
                "objective_delta": sol.objective - before,
                "resolve_ms": resolve_ms,
                "edits": len(record.edits),
                "contours": _contours_payload(session, jei.AXES[nudge.axis],
                                              nudge.slice_index),
            }

    @app.post("/sessions/{sid}/undo")
    async def post_undo(sid: str, body: dict | None = None):
        session = get_session(sid)
        with session.lock:
            if not session.history:
                raise ServiceError("failed-precondition", "undo",
                                   "nothing to undo", 412)
            last = session.history[-1]
            session.solution = jei.undo(session.flow, session.history)
            session.sequence += 1
            session.log({"op": "undo"})
            payload = {"sequence": session.sequence,
                       "objective": session.solution.objective,
                       "undone_seq": last.seq}
            if body and "axis" in body and "index" in body:
                payload["contours"] = _contours_payload(
                    session, jei.AXES[body["axis"]], int(body["index"]))
            return payload

    @app.post("/sessions/{sid}/export")
    async def post_export(sid: str, body: dict):
        session = get_session(sid)
        out_dir = body.get("out_dir")
        if not out_dir:
            raise ServiceError("invalid-argument", "export",
                               "out_dir required", 422)
        with session.lock:
            os.makedirs(out_dir, exist_ok=True)
            ctx = harness.SegmentationContext(
                graph=session.graph, flow=session.flow,
                solution=session.solution)
            files = []
            for (obj, surf), mesh in harness.solution_meshes(ctx).items():
                path = os.path.join(out_dir, f"o{obj}_s{surf}.obj")
                write_obj(mesh, path)
                files.append(path)
            return {"sequence": session.sequence, "files": files}

    @app.get("/sessions/{sid}/status")
    async def get_status(sid: str):
        session = get_session(sid)
        with session.lock:
            return {
                "id": session.session_id,
                "volume": session.volume_name,
                "mode": session.mode,
                "sequence": session.sequence,
                "edits": len(session.history),
                "objective": session.solution.objective,
                "config": session.config_snapshot,
            }

    return app
