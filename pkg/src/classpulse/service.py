"""Live classroom sessions over a JSON WebSocket protocol.

Wire protocol (one UTF-8 JSON object per message):

  student -> server
    {"type":"join","classroom":"<id>","name":"<text>"}
    {"type":"landmarks","ts_ms":<int>,"w":<int>,"h":<int>,"points":[[x,y]*68]}
    {"type":"expression","ts_ms":<int>,"label":"happiness|focused|confused|disgust|tired|neutral"}
    {"type":"leave"}
  teacher -> server
    {"type":"create","name":"<text>"}
    {"type":"attach","classroom":"<id>","token":"<token>"}
    {"type":"close","classroom":"<id>","token":"<token>"}
  server -> student
    {"type":"joined","student_id":"<id>"}
  server -> teacher
    {"type":"created","classroom":"<id>","name":"<text>","token":"<token>"}
    {"type":"closed","classroom":"<id>"}
    {"type":"roster","classroom":"<id>","students":[{"student","name","p","n"}]}
    {"type":"reaction","student":"<id>","reaction":"positive|negative|neutral",
     "source":"head|expression","ts_ms":<int>}
    {"type":"evaluation","ts_ms":<int>,"r_class":<float>,"level":"POSITIVE|NEGATIVE|NEUTRAL",
     "per_student":[{"student":"<id>","w":<float>,"r":<float>}]}
  rejections (either direction)
    {"type":"error","code":"<symbol>","detail":"<text>"}

Concurrency: all classroom state mutations run on the server's single event
loop, which acts as the per-classroom owner; handlers never await while
mutating.  Teacher broadcasts go through bounded per-connection feeds so a
slow teacher can never stall student ingestion; on overflow the oldest
EVALUATION broadcast is dropped first.  Every state transition is appended
and flushed to the classroom's event log before it is broadcast.
"""
from __future__ import annotations

import asyncio
import json
import logging
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .errors import ClasspulseError, InvalidInputError, ServiceRejection
from .evaluation import (
    ClassEvaluation,
    EvaluationParams,
    ReactionLabel,
    StudentRecord,
    apply_reaction,
    class_score,
)
from .events import EventKind, EventLog, SessionEvent
from .headpose import GestureDetector, HeadPoseConfig, LandmarkFrame, estimate_euler
from .sensors import ExpressionLabel, expression_to_reaction, gesture_to_reaction

log = logging.getLogger(__name__)

STATUS_OPEN = "open"
STATUS_CLOSED = "closed"


class TeacherFeed:
    """Bounded broadcast queue for one teacher connection.

    push() never blocks: when full, the oldest evaluation message is
    dropped to make room (reaction/roster messages are kept as long as
    possible, and log entries are already on disk regardless).
    """

    def __init__(self, maxlen: int = 256):
        self.maxlen = maxlen
        self._items: deque[dict[str, Any]] = deque()
        self._wakeup = asyncio.Event()

    def push(self, message: dict[str, Any]) -> None:
        if len(self._items) >= self.maxlen:
            for i, item in enumerate(self._items):
                if item.get("type") == "evaluation":
                    del self._items[i]
                    break
            else:
                self._items.popleft()
        self._items.append(message)
        self._wakeup.set()

    async def drain(self) -> list[dict[str, Any]]:
        while not self._items:
            self._wakeup.clear()
            await self._wakeup.wait()
        out = list(self._items)
        self._items.clear()
        return out


@dataclass
class Classroom:
    classroom_id: str
    name: str
    token: str
    created_at_ms: int
    log: EventLog
    status: str = STATUS_OPEN
    roster: dict[str, StudentRecord] = field(default_factory=dict)
    join_order: list[str] = field(default_factory=list)
    detectors: dict[str, GestureDetector] = field(default_factory=dict)
    last_frame_ts: dict[str, int] = field(default_factory=dict)
    pending: dict[str, ReactionLabel] = field(default_factory=dict)
    departed: dict[str, StudentRecord] = field(default_factory=dict)
    feeds: list[TeacherFeed] = field(default_factory=list)


class ClassroomManager:
    """Synchronous session core: rooms, rosters, reaction pipeline, ticks.

    The wire layer drives this from a single event loop; tests may drive it
    directly.  Distinct classrooms share nothing but this registry.
    """

    def __init__(
        self,
        log_dir: str | Path = "logs",
        headpose_config: HeadPoseConfig | None = None,
        params: EvaluationParams | None = None,
        tick_ms: int = 1000,
        clock_ms: Callable[[], int] | None = None,
    ):
        self.log_dir = Path(log_dir)
        self.headpose_config = headpose_config or HeadPoseConfig()
        self.params = params or EvaluationParams()
        self.tick_ms = tick_ms
        self.clock_ms = clock_ms or (lambda: int(time.time() * 1000))
        self.classrooms: dict[str, Classroom] = {}

    # -- lifecycle ---------------------------------------------------------

    def create_classroom(self, name: str) -> Classroom:
        classroom_id = uuid.uuid4().hex[:8]
        while classroom_id in self.classrooms:
            classroom_id = uuid.uuid4().hex[:8]
        room = Classroom(
            classroom_id=classroom_id,
            name=name,
            token=uuid.uuid4().hex,
            created_at_ms=self.clock_ms(),
            log=EventLog(self.log_dir / f"{classroom_id}.jsonl"),
        )
        self.classrooms[classroom_id] = room
        self._log(room, EventKind.CLASSROOM_CREATED, {"name": name})
        return room

    def close_classroom(self, classroom_id: str, token: str) -> None:
        room = self._room(classroom_id)
        if token != room.token:
            raise ServiceRejection("auth_failed", "bad classroom token")
        if room.status == STATUS_CLOSED:
            return
        room.status = STATUS_CLOSED
        self._log(room, EventKind.CLASSROOM_CLOSED, {})
        self._fanout(room, {"type": "closed", "classroom": room.classroom_id})
        room.log.close()

    def close_all(self) -> None:
        for room in list(self.classrooms.values()):
            if room.status == STATUS_OPEN:
                self.close_classroom(room.classroom_id, room.token)

    # -- students ----------------------------------------------------------

    def join_classroom(self, classroom_id: str, display_name: str) -> str:
        room = self._open_room(classroom_id, code="join_rejected")
        student_id = uuid.uuid4().hex[:12]
        room.roster[student_id] = StudentRecord(student_id=student_id, display_name=display_name)
        room.join_order.append(student_id)
        room.detectors[student_id] = GestureDetector(config=self.headpose_config)
        self._log(room, EventKind.STUDENT_JOINED,
                  {"student_id": student_id, "display_name": display_name})
        self._fanout(room, self.roster_message(classroom_id))
        return student_id

    def leave_classroom(self, classroom_id: str, student_id: str) -> None:
        room = self.classrooms.get(classroom_id)
        if room is None or student_id not in room.roster:
            return
        # history is retained for the session archive; a rejoin gets a
        # fresh identity and starts from zero
        room.departed[student_id] = room.roster.pop(student_id)
        room.join_order.remove(student_id)
        room.detectors.pop(student_id, None)
        room.last_frame_ts.pop(student_id, None)
        room.pending.pop(student_id, None)
        if room.status == STATUS_OPEN:
            self._log(room, EventKind.STUDENT_LEFT, {"student_id": student_id})
            self._fanout(room, self.roster_message(classroom_id))

    # -- ingestion ---------------------------------------------------------

    def ingest_landmark_frame(
        self,
        classroom_id: str,
        student_id: str,
        ts_ms: int,
        width: int,
        height: int,
        points: Any,
    ) -> ReactionLabel | None:
        room = self._open_room(classroom_id, code="frame_rejected")
        if student_id not in room.roster:
            raise ServiceRejection("frame_rejected", "unknown student")
        last = room.last_frame_ts.get(student_id)
        if last is not None and ts_ms <= last:
            raise ServiceRejection("frame_rejected", "timestamps must be strictly increasing")
        try:
            frame = LandmarkFrame(
                student_id=student_id, ts_ms=ts_ms, width=width, height=height, points=points
            )
        except InvalidInputError as exc:
            raise ServiceRejection("frame_rejected", str(exc)) from None
        room.last_frame_ts[student_id] = ts_ms

        sample = estimate_euler(frame, self.headpose_config)
        if sample is None:
            return None  # outlier; the stream continues
        gesture = room.detectors[student_id].step(sample)
        if gesture is None:
            return None
        label = gesture_to_reaction(gesture)
        self._record_reaction(room, student_id, label, "head", ts_ms)
        return label

    def ingest_expression(
        self, classroom_id: str, student_id: str, label_text: str, ts_ms: int
    ) -> ReactionLabel | None:
        room = self._open_room(classroom_id, code="message_rejected")
        if student_id not in room.roster:
            raise ServiceRejection("message_rejected", "unknown student")
        try:
            expression = ExpressionLabel(label_text)
        except ValueError:
            raise ServiceRejection("message_rejected",
                                   f"unknown expression label '{label_text}'") from None
        label = expression_to_reaction(expression)
        if label is ReactionLabel.NEUTRAL and student_id in room.pending:
            return None  # an observed reaction this tick outranks neutral
        self._record_reaction(room, student_id, label, "expression", ts_ms)
        return label

    # -- evaluation --------------------------------------------------------

    def evaluation_tick(self, classroom_id: str) -> ClassEvaluation | None:
        room = self._room(classroom_id)
        if room.status != STATUS_OPEN or not room.join_order:
            return None  # empty classroom: tick skipped
        records = [room.roster[sid] for sid in room.join_order]
        reactions = [room.pending.get(sid, ReactionLabel.NEUTRAL) for sid in room.join_order]
        evaluation = class_score(records, reactions, self.params, ts_ms=self.clock_ms())
        self._log(room, EventKind.EVALUATION, {
            "r_class": evaluation.r_class,
            "level": evaluation.level.name,
            "per_student": [
                {"student": sid, "w": w, "r": r} for sid, w, r in evaluation.per_student
            ],
        })
        self._fanout(room, {
            "type": "evaluation",
            "ts_ms": evaluation.ts_ms,
            "r_class": evaluation.r_class,
            "level": evaluation.level.name,
            "per_student": [
                {"student": sid, "w": w, "r": r} for sid, w, r in evaluation.per_student
            ],
        })
        for sid, label in zip(room.join_order, reactions):
            room.roster[sid] = apply_reaction(room.roster[sid], label)
        room.pending.clear()
        return evaluation

    # -- teacher fanout ----------------------------------------------------

    def attach_teacher(self, classroom_id: str, token: str, feed: TeacherFeed) -> Classroom:
        room = self._room(classroom_id)
        if token != room.token:
            raise ServiceRejection("auth_failed", "bad classroom token")
        room.feeds.append(feed)
        feed.push(self.roster_message(classroom_id))
        return room

    def detach_teacher(self, classroom_id: str, feed: TeacherFeed) -> None:
        room = self.classrooms.get(classroom_id)
        if room is not None and feed in room.feeds:
            room.feeds.remove(feed)

    def roster_message(self, classroom_id: str) -> dict[str, Any]:
        room = self._room(classroom_id)
        return {
            "type": "roster",
            "classroom": room.classroom_id,
            "status": room.status,
            "students": [
                {
                    "student": sid,
                    "name": room.roster[sid].display_name,
                    "p": room.roster[sid].p,
                    "n": room.roster[sid].n,
                }
                for sid in room.join_order
            ],
        }

    # -- internals ---------------------------------------------------------

    def _room(self, classroom_id: str) -> Classroom:
        room = self.classrooms.get(classroom_id)
        if room is None:
            raise ServiceRejection("join_rejected", f"unknown classroom '{classroom_id}'")
        return room

    def _open_room(self, classroom_id: str, code: str) -> Classroom:
        room = self.classrooms.get(classroom_id)
        if room is None:
            raise ServiceRejection(code, f"unknown classroom '{classroom_id}'")
        if room.status != STATUS_OPEN:
            raise ServiceRejection(code, "classroom is closed")
        return room

    def _log(self, room: Classroom, kind: EventKind, payload: dict[str, Any]) -> None:
        room.log.append(SessionEvent(self.clock_ms(), room.classroom_id, kind, payload))

    def _fanout(self, room: Classroom, message: dict[str, Any]) -> None:
        for feed in room.feeds:
            feed.push(message)

    def _record_reaction(
        self, room: Classroom, student_id: str, label: ReactionLabel, source: str, ts_ms: int
    ) -> None:
        room.pending[student_id] = label
        self._log(room, EventKind.REACTION,
                  {"student_id": student_id, "reaction": label.value, "source": source})
        self._fanout(room, {
            "type": "reaction",
            "student": student_id,
            "reaction": label.value,
            "source": source,
            "ts_ms": ts_ms,
        })


def create_app(manager: ClassroomManager, static_dir: str | Path | None = None) -> FastAPI:
    """Build the FastAPI app exposing /ws plus health and static assets."""
    tickers: dict[str, asyncio.Task] = {}

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        yield
        for task in tickers.values():
            task.cancel()
        manager.close_all()

    app = FastAPI(title="classpulse", version="0.1.0", lifespan=lifespan)
    app.state.manager = manager

    async def ticker(classroom_id: str) -> None:
        while True:
            await asyncio.sleep(manager.tick_ms / 1000.0)
            room = manager.classrooms.get(classroom_id)
            if room is None or room.status != STATUS_OPEN:
                return
            try:
                manager.evaluation_tick(classroom_id)
            except ClasspulseError as exc:
                log.error("tick failed for %s: %s", classroom_id, exc)

    def ensure_ticker(classroom_id: str) -> None:
        task = tickers.get(classroom_id)
        if task is None or task.done():
            tickers[classroom_id] = asyncio.create_task(ticker(classroom_id))

    @app.get("/healthz")
    async def healthz() -> dict[str, Any]:
        return {
            "status": "ok",
            "classrooms": len(manager.classrooms),
            "students": sum(len(r.roster) for r in manager.classrooms.values()),
        }

    @app.on_event("shutdown")
    async def shutdown() -> None:
        for task in tickers.values():
            task.cancel()
        manager.close_all()

    async def send(ws: WebSocket, message: dict[str, Any]) -> None:
        await ws.send_text(json.dumps(message))

    async def send_error(ws: WebSocket, code: str, detail: str) -> None:
        await send(ws, {"type": "error", "code": code, "detail": detail})

    async def student_session(ws: WebSocket, first: dict[str, Any]) -> None:
        classroom_id = str(first.get("classroom", ""))
        name = str(first.get("name", ""))
        student_id = manager.join_classroom(classroom_id, name)
        ensure_ticker(classroom_id)
        await send(ws, {"type": "joined", "student_id": student_id})
        try:
            while True:
                msg = json.loads(await ws.receive_text())
                kind = msg.get("type")
                try:
                    if kind == "landmarks":
                        manager.ingest_landmark_frame(
                            classroom_id, student_id,
                            int(msg["ts_ms"]), int(msg["w"]), int(msg["h"]), msg["points"],
                        )
                    elif kind == "expression":
                        manager.ingest_expression(
                            classroom_id, student_id, str(msg["label"]), int(msg["ts_ms"])
                        )
                    elif kind == "leave":
                        return
                    else:
                        await send_error(ws, "message_rejected", f"unknown type '{kind}'")
                except ServiceRejection as exc:
                    await send_error(ws, exc.code, exc.detail)
                except (KeyError, TypeError, ValueError) as exc:
                    await send_error(ws, "message_rejected", f"malformed message: {exc}")
        finally:
            manager.leave_classroom(classroom_id, student_id)

    async def teacher_session(ws: WebSocket, first: dict[str, Any]) -> None:
        feed = TeacherFeed()
        attached: str | None = None
        sender: asyncio.Task | None = None

        async def pump() -> None:
            while True:
                for message in await feed.drain():
                    await send(ws, message)

        msg = first
        try:
            while True:
                kind = msg.get("type")
                try:
                    if kind == "create":
                        room = manager.create_classroom(str(msg.get("name", "")))
                        ensure_ticker(room.classroom_id)
                        await send(ws, {
                            "type": "created",
                            "classroom": room.classroom_id,
                            "name": room.name,
                            "token": room.token,
                        })
                    elif kind == "attach":
                        room = manager.attach_teacher(
                            str(msg.get("classroom", "")), str(msg.get("token", "")), feed
                        )
                        attached = room.classroom_id
                        if sender is None:
                            sender = asyncio.create_task(pump())
                    elif kind == "close":
                        manager.close_classroom(
                            str(msg.get("classroom", "")), str(msg.get("token", ""))
                        )
                        await send(ws, {"type": "closed", "classroom": msg.get("classroom")})
                    else:
                        await send_error(ws, "message_rejected", f"unknown type '{kind}'")
                except ServiceRejection as exc:
                    await send_error(ws, exc.code, exc.detail)
                msg = json.loads(await ws.receive_text())
        finally:
            if sender is not None:
                sender.cancel()
            if attached is not None:
                manager.detach_teacher(attached, feed)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        try:
            first = json.loads(await ws.receive_text())
        except WebSocketDisconnect:
            return
        except ValueError:
            await send_error(ws, "message_rejected", "messages must be JSON objects")
            await ws.close()
            return
        try:
            if first.get("type") == "join":
                try:
                    await student_session(ws, first)
                except ServiceRejection as exc:
                    await send_error(ws, exc.code, exc.detail)
            elif first.get("type") in ("create", "attach", "close"):
                await teacher_session(ws, first)
            else:
                await send_error(ws, "message_rejected",
                                 "first message must be join, create, attach, or close")
        except WebSocketDisconnect:
            pass

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")

    return app
