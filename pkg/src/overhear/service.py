"""HTTP + WebSocket network boundary for live sessions, feedback, annotations.

All wire payloads are JSON with lower_snake_case keys. Mutations for one
session funnel through that session's lock so intervals are processed
strictly in order; reads are lock-free snapshots. Observers (DM console,
annotation tooling) may attach read-only to the same event stream.
"""

from __future__ import annotations

import asyncio
import base64
import logging
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware

from . import persistence
from .backends import ModelBackend, ScriptedBackend, Transcriber
from .core import (
    PCM16_BYTES_PER_SECOND,
    EntityType,
    Interval,
    SessionEvent,
    ValidationError,
    validate_interval,
)
from .engine import OutOfOrderInterval, SessionConfig, SessionState, new_session, on_interval
from .evaluation import SCORE_LABELS, SCORES, SUBLABELS, Annotation
from .gamedata import Corpus, load_corpus, search_entity

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "OVERHEAR_DATA_DIR"
PORT_ENV = "OVERHEAR_PORT"

BackendFactory = Callable[[dict], ModelBackend]


def default_backend_factory(spec: dict) -> ModelBackend:
    kind = spec.get("type", "scripted")
    if kind == "scripted":
        if "script" in spec:
            return ScriptedBackend.load(spec["script"])
        return ScriptedBackend()
    if kind == "http":
        from .backends import HttpChatBackend

        return HttpChatBackend(
            base_url=spec.get("base_url"),
            model=spec.get("model", "default"),
            native_tool_calls=bool(spec.get("native_tool_calls", False)),
        )
    raise ValidationError(f"unknown backend type {kind!r}")


@dataclass
class SessionRuntime:
    state: SessionState
    backend: ModelBackend
    transcriber: Transcriber | None = None
    events: list[SessionEvent] = field(default_factory=list)
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    pending: int = 0

    @property
    def last_seq(self) -> int:
        return self.state.next_seq - 1


class OverhearService:
    def __init__(
        self,
        corpus: Corpus,
        data_dir: str | Path,
        backend_factory: BackendFactory = default_backend_factory,
        default_backend: dict | None = None,
        transcriber: Transcriber | None = None,
    ):
        self.corpus = corpus
        self.data_dir = Path(data_dir)
        self.backend_factory = backend_factory
        self.default_backend = default_backend or {"type": "scripted"}
        self.transcriber = transcriber
        self.sessions: dict[str, SessionRuntime] = {}

    def create_session(self, body: dict) -> SessionRuntime:
        config = SessionConfig.from_dict(body)
        session_id = body.get("session_id") or uuid.uuid4().hex[:12]
        if session_id in self.sessions:
            raise ValidationError(f"session {session_id!r} already exists")
        backend = self.backend_factory(body.get("backend") or self.default_backend)
        state = new_session(session_id, config, self.corpus)
        runtime = SessionRuntime(state=state, backend=backend, transcriber=self.transcriber)
        self.sessions[session_id] = runtime
        persistence.save_config(self.data_dir, session_id, config)
        return runtime

    def get_session(self, session_id: str) -> SessionRuntime | None:
        runtime = self.sessions.get(session_id)
        if runtime is None:
            state = persistence.load_session(self.data_dir, session_id, self.corpus)
            if state is None:
                return None
            runtime = SessionRuntime(
                state=state,
                backend=self.backend_factory(self.default_backend),
                transcriber=self.transcriber,
                events=persistence.load_events(self.data_dir, session_id),
            )
            self.sessions[session_id] = runtime
        return runtime

    async def process_interval(self, runtime: SessionRuntime, interval: Interval) -> list[SessionEvent]:
        runtime.pending += 1
        if runtime.pending > 1:
            logger.info(
                "session %s: interval %d queued (depth %d)",
                runtime.state.session_id,
                interval.index,
                runtime.pending - 1,
            )
        async with runtime.lock:
            try:
                state, events = await asyncio.to_thread(
                    on_interval, runtime.state, interval, runtime.backend, runtime.transcriber
                )
            finally:
                runtime.pending -= 1
            runtime.state = state
            runtime.events.extend(events)
            for event in events:
                persistence.append_event(self.data_dir, event)
            for queue in list(runtime.subscribers):
                for event in events:
                    queue.put_nowait(event)
            return events


def _interval_from_frame(frame: dict, next_index: int) -> Interval:
    kind = frame.get("type")
    if kind == "audio":
        try:
            audio = base64.b64decode(frame["data"], validate=True)
        except KeyError:
            raise ValidationError("audio frame requires a base64 'data' field") from None
        except Exception as exc:
            raise ValidationError(f"audio frame data is not valid base64: {exc}") from exc
        duration = frame.get("duration_seconds")
        if duration is None:
            duration = len(audio) / PCM16_BYTES_PER_SECOND
        record: dict[str, Any] = {
            "index": next_index,
            "start_seconds": frame.get("start_seconds", 0.0),
            "duration_seconds": duration,
            "audio": audio,
        }
        if frame.get("transcript") is not None:
            record["transcript"] = frame["transcript"]
        return validate_interval(record)
    if kind == "text_interval":
        try:
            record = {
                "index": next_index,
                "start_seconds": frame.get("start_seconds", 0.0),
                "transcript": frame["text"],
            }
        except KeyError:
            raise ValidationError("text_interval frame requires a 'text' field") from None
        if frame.get("duration_seconds") is not None:
            record["duration_seconds"] = frame["duration_seconds"]
        return validate_interval(record)
    raise ValidationError(f"unknown frame type {kind!r}")


def create_app(
    corpus: Corpus | str | Path,
    data_dir: str | Path,
    backend_factory: BackendFactory = default_backend_factory,
    default_backend: dict | None = None,
    transcriber: Transcriber | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    if not isinstance(corpus, Corpus):
        corpus = load_corpus(corpus)
    service = OverhearService(
        corpus=corpus,
        data_dir=data_dir,
        backend_factory=backend_factory,
        default_backend=default_backend,
        transcriber=transcriber,
    )
    app = FastAPI(title="overhear")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.service = service

    def _require_session(session_id: str) -> SessionRuntime:
        runtime = service.get_session(session_id)
        if runtime is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return runtime

    @app.get("/sessions")
    def sessions_index() -> dict:
        known = set(persistence.list_sessions(service.data_dir)) | set(service.sessions)
        return {"sessions": sorted(known)}

    @app.post("/sessions", status_code=201)
    def sessions_create(body: dict) -> dict:
        try:
            runtime = service.create_session(body)
        except (ValidationError, OSError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"session_id": runtime.state.session_id}

    @app.get("/sessions/{session_id}/events")
    def session_events(
        session_id: str, since: int = Query(default=0), limit: int = Query(default=1000)
    ) -> dict:
        runtime = _require_session(session_id)
        page = [e.to_dict() for e in runtime.events if e.seq > since][:limit]
        next_since = page[-1]["seq"] if page else since
        return {"events": page, "next_since": next_since}

    @app.get("/sessions/{session_id}/stage")
    def session_stage(session_id: str) -> dict:
        runtime = _require_session(session_id)
        return runtime.state.stage.to_dict()

    @app.get("/sessions/{session_id}/annotations")
    def session_annotations(session_id: str, annotator: str | None = None) -> dict:
        _require_session(session_id)
        records = persistence.load_jsonl(
            persistence.session_dir(service.data_dir, session_id) / "annotations.jsonl"
        )
        if annotator is not None:
            records = [r for r in records if r.get("annotator_id") == annotator]
        return {"annotations": records}

    @app.get("/corpus/entities")
    def corpus_entities(
        type: str = Query(...), q: str = Query(...), k: int = Query(default=3)
    ) -> dict:
        try:
            entity_type = EntityType.parse(type)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        hits = search_entity(service.corpus, entity_type, q, k=k)
        return {"entities": [e.to_dict() for e in hits]}

    @app.get("/annotations/schema")
    def annotation_schema() -> dict:
        return {
            "scores": [
                {
                    "score": score,
                    "key": SCORE_LABELS[score]["key"],
                    "label": SCORE_LABELS[score]["label"],
                    "sublabels": list(SUBLABELS[score]),
                }
                for score in SCORES
            ]
        }

    @app.post("/suggestions/{suggestion_id}/feedback")
    def suggestion_feedback(suggestion_id: str, body: dict) -> dict:
        action = body.get("action")
        if action not in ("accept", "dismiss"):
            raise HTTPException(status_code=400, detail="action must be 'accept' or 'dismiss'")
        session_id = suggestion_id.rsplit(":", 1)[0]
        runtime = _require_session(session_id)
        if not any(e.payload.get("suggestion_id") == suggestion_id for e in runtime.events):
            raise HTTPException(status_code=404, detail=f"unknown suggestion {suggestion_id!r}")
        record = {
            "suggestion_id": suggestion_id,
            "action": action,
            "wall_clock_ms": time.time_ns() // 1_000_000,
        }
        persistence.append_feedback(service.data_dir, session_id, record)
        return {"ok": True}

    @app.post("/annotations", status_code=201)
    def annotations_create(body: dict) -> dict:
        try:
            annotation = Annotation.from_dict(body)
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session_id = body.get("session_id") or annotation.suggestion_id.rsplit(":", 1)[0]
        _require_session(session_id)
        persistence.append_annotation(service.data_dir, session_id, annotation.to_dict())
        return {"ok": True}

    @app.websocket("/sessions/{session_id}/stream")
    async def session_stream(websocket: WebSocket, session_id: str, since: int = Query(default=-1)):
        runtime = service.get_session(session_id)
        if runtime is None:
            await websocket.close(code=4404, reason=f"unknown session {session_id!r}")
            return
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        runtime.subscribers.append(queue)

        async def sender() -> None:
            while True:
                event = await queue.get()
                await websocket.send_json(event.to_dict())

        sender_task = asyncio.create_task(sender())
        try:
            if since >= 0:
                for event in runtime.events:
                    if event.seq > since:
                        queue.put_nowait(event)
            while True:
                frame = await websocket.receive_json()
                next_index = runtime.state.last_index + 1
                try:
                    interval = _interval_from_frame(frame, next_index)
                except ValidationError as exc:
                    await websocket.send_json({"type": "error", "code": 400, "detail": str(exc)})
                    continue
                try:
                    await service.process_interval(runtime, interval)
                except OutOfOrderInterval as exc:
                    await websocket.send_json({"type": "error", "code": 409, "detail": str(exc)})
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            if queue in runtime.subscribers:
                runtime.subscribers.remove(queue)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
