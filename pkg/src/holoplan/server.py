"""Wire protocol for the operator console: REST request/response endpoints
plus a per-session WebSocket channel for server push and marker updates.

Endpoints:
    POST /sessions                   -> {"session_id": ...}
    GET  /sessions/{sid}             -> {"state": ..., "candidates": [...]}
    PUT  /sessions/{sid}/scene       <- scene JSON (holoplan-scene/1)
    POST /sessions/{sid}/plan        <- {"k"?, "base_seed"?}; runs off-path
    POST /sessions/{sid}/confirm     <- {"path_id"}; builds, validates, executes
    GET  /sessions/{sid}/trajectory  -> trajectory JSON (holoplan-trajectory/1)
    WS   /sessions/{sid}/channel     -> push: candidates, selection_event,
                                        execution_frame, notice;
                                        client->server: marker_update

Planning jobs and execution streaming run on worker threads; the WebSocket
layer only moves messages between the session's subscriber queue and the
socket.
"""

from __future__ import annotations

import queue
import threading
from pathlib import Path

import anyio
from fastapi import FastAPI, Request, Response, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .planning import PlanningFailed
from .scene import MalformedScene, SchemaVersionUnsupported, load_scene
from .selection import (
    AlreadyExecuted,
    BadMarkerIndex,
    MarkerUpdate,
    NotSelected,
    StaleSequence,
    UnknownPath,
)
from .service import (
    InvalidState,
    OrderRejected,
    PlanningService,
    UnknownSession,
    ValidationFailed,
)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def create_app(
    service: PlanningService | None = None,
    frontend_dir: str | None = None,
) -> FastAPI:
    service = service or PlanningService(pace=True)
    app = FastAPI(title="holoplan", docs_url=None, redoc_url=None)
    app.state.service = service
    selection_loops: dict[str, threading.Event] = {}

    def start_selection_loop(sid: str) -> None:
        stop = threading.Event()
        selection_loops[sid] = stop

        def loop():
            session = service.session(sid)
            period = 1.0 / (
                session.candidate_set.cadence_hz if session.candidate_set else 60.0
            )
            while not stop.is_set():
                try:
                    service.selection_cycle(sid)
                except InvalidState:
                    break
                except (StaleSequence, UnknownPath, BadMarkerIndex) as exc:
                    service._notice(
                        session, "warn", "bad_marker_update", str(exc)
                    )
                stop.wait(period)

        threading.Thread(target=loop, name=f"selection-{sid[:8]}", daemon=True).start()

    def stop_selection_loop(sid: str) -> None:
        stop = selection_loops.pop(sid, None)
        if stop is not None:
            stop.set()

    @app.post("/sessions")
    def create_session():
        return {"session_id": service.create_session()}

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        try:
            session = service.session(sid)
        except UnknownSession:
            return _error(404, "unknown_session", sid)
        with session.lock:
            candidates = [
                service._candidate_payload(p, session.advisory)
                for p in (session.candidates or [])
            ]
            return {
                "session": sid,
                "state": session.state.value,
                "candidates": candidates,
                "failures": [
                    {"run": f.run, "reason": f.reason} for f in session.failures
                ],
            }

    @app.put("/sessions/{sid}/scene")
    async def put_scene(sid: str, request: Request):
        body = await request.body()
        try:
            scene = load_scene(body)
            service.put_scene(sid, scene)
        except UnknownSession:
            return _error(404, "unknown_session", sid)
        except SchemaVersionUnsupported as exc:
            return _error(400, "schema_version_unsupported", str(exc))
        except MalformedScene as exc:
            return _error(400, "malformed_scene", str(exc))
        except InvalidState as exc:
            return _error(409, "invalid_state", str(exc))
        return {"ok": True}

    @app.post("/sessions/{sid}/plan")
    async def plan(sid: str, request: Request):
        try:
            body = await request.json() if await request.body() else {}
        except Exception:
            body = {}
        try:
            session = service.session(sid)
            with session.lock:
                if session.scene is None:
                    return _error(409, "invalid_state", "no scene loaded")
                if session.state.value != "idle":
                    return _error(
                        409, "invalid_state", f"cannot plan while {session.state.value}"
                    )
        except UnknownSession:
            return _error(404, "unknown_session", sid)

        def job():
            try:
                service.plan(sid, k=body.get("k"), base_seed=body.get("base_seed"))
            except PlanningFailed:
                return  # notice already pushed
            except Exception:
                return
            start_selection_loop(sid)

        threading.Thread(target=job, name=f"plan-{sid[:8]}", daemon=True).start()
        return {"accepted": True}

    @app.post("/sessions/{sid}/confirm")
    async def confirm(sid: str, request: Request):
        try:
            body = await request.json()
            path_id = int(body["path_id"])
        except Exception:
            return _error(400, "bad_request", "body must carry path_id")
        try:
            trajectory = service.confirm(sid, path_id)
        except UnknownSession:
            return _error(404, "unknown_session", sid)
        except UnknownPath as exc:
            return _error(400, "unknown_path", str(exc))
        except (NotSelected, AlreadyExecuted, InvalidState) as exc:
            return _error(409, type(exc).__name__.lower(), str(exc))
        except OrderRejected as exc:
            return _error(409, "order_rejected", str(exc))
        except ValidationFailed as exc:
            return _error(409, "validation_failed", str(exc))
        except Exception as exc:
            return _error(409, "trajectory_failed", str(exc))

        stop_selection_loop(sid)

        def stream():
            try:
                for _ in service.execute(sid):
                    pass
            except Exception:
                pass  # fault notice already pushed

        threading.Thread(target=stream, name=f"exec-{sid[:8]}", daemon=True).start()
        return {"ok": True, "samples": len(trajectory)}

    @app.get("/sessions/{sid}/trajectory")
    def trajectory(sid: str):
        try:
            blob = service.export_trajectory(sid)
        except UnknownSession:
            return _error(404, "unknown_session", sid)
        except InvalidState as exc:
            return _error(404, "no_trajectory", str(exc))
        return Response(content=blob, media_type="application/json")

    @app.websocket("/sessions/{sid}/channel")
    async def channel(ws: WebSocket, sid: str):
        try:
            service.session(sid)
        except UnknownSession:
            await ws.close(code=4004)
            return
        await ws.accept()
        q = service.subscribe(sid)

        async def pump_out():
            while True:
                try:
                    msg = await anyio.to_thread.run_sync(
                        lambda: q.get(timeout=0.25)
                    )
                except queue.Empty:
                    continue
                await ws.send_json(msg)

        import asyncio

        out_task = asyncio.ensure_future(pump_out())
        try:
            while True:
                data = await ws.receive_json()
                if data.get("type") == "marker_update":
                    try:
                        service.queue_marker_updates(
                            sid,
                            [
                                MarkerUpdate(
                                    path_id=int(data["path_id"]),
                                    marker=int(data["marker"]),
                                    position=[float(v) for v in data["position"]],
                                    seq=int(data["seq"]),
                                )
                            ],
                        )
                    except (KeyError, TypeError, ValueError):
                        await ws.send_json(
                            {"type": "notice", "level": "warn",
                             "code": "bad_marker_update",
                             "message": "malformed marker_update"}
                        )
        except WebSocketDisconnect:
            pass
        finally:
            out_task.cancel()
            service.unsubscribe(sid, q)

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="console")

    return app
