"""Append-only JSON Lines session event log with deterministic replay.

One file per classroom; every event is flushed on append so a crash or
interrupt never leaves a torn log beyond its final line.  Replaying the
REACTION events through the scoring pipeline reproduces every logged
EVALUATION, which is how log integrity is verified.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, IO

from .errors import ReplayParseError
from .evaluation import (
    EvaluationParams,
    ReactionLabel,
    StudentRecord,
    apply_reaction,
    class_score,
)


class EventKind(Enum):
    CLASSROOM_CREATED = "classroom_created"
    STUDENT_JOINED = "student_joined"
    STUDENT_LEFT = "student_left"
    REACTION = "reaction"
    EVALUATION = "evaluation"
    CLASSROOM_CLOSED = "classroom_closed"


@dataclass(frozen=True)
class SessionEvent:
    ts_ms: int
    classroom_id: str
    kind: EventKind
    payload: dict[str, Any]

    def to_json(self) -> str:
        # field order on the wire is fixed: ts_ms, classroom_id, kind, payload
        return json.dumps({
            "ts_ms": self.ts_ms,
            "classroom_id": self.classroom_id,
            "kind": self.kind.value,
            "payload": self.payload,
        }, ensure_ascii=True)


@dataclass
class EventLog:
    """Per-classroom append-only writer; flushes every event."""

    path: Path
    _fh: IO[str] | None = field(default=None, repr=False)
    _last_ts: int = 0

    def append(self, event: SessionEvent) -> SessionEvent:
        # keep per-classroom timestamps non-decreasing even if the clock slips
        ts = max(event.ts_ms, self._last_ts)
        if ts != event.ts_ms:
            event = SessionEvent(ts, event.classroom_id, event.kind, event.payload)
        self._last_ts = ts
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a", encoding="utf-8")
        self._fh.write(event.to_json() + "\n")
        self._fh.flush()
        return event

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def replay_log(path: str | Path) -> list[SessionEvent]:
    """Re-emit the logged events in order; halts at the first corrupt line."""
    events: list[SessionEvent] = []
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
            events.append(SessionEvent(
                ts_ms=int(obj["ts_ms"]),
                classroom_id=str(obj["classroom_id"]),
                kind=EventKind(obj["kind"]),
                payload=dict(obj["payload"]),
            ))
        except (ValueError, KeyError, TypeError) as exc:
            raise ReplayParseError(str(path), lineno, f"corrupt event line: {exc}") from None
    return events


def recompute_evaluations(
    events: list[SessionEvent],
    params: EvaluationParams | None = None,
) -> list[tuple[float, float]]:
    """Walk the log and rescore every EVALUATION from the REACTION stream.

    Returns (logged_r_class, recomputed_r_class) pairs, in log order.  The
    walker mirrors the live tick: reactions accumulate as pending, an
    evaluation scores the roster with NEUTRAL filled in, then history is
    updated and pendings clear.
    """
    params = params or EvaluationParams()
    roster: dict[str, StudentRecord] = {}
    order: list[str] = []
    pending: dict[str, ReactionLabel] = {}
    pairs: list[tuple[float, float]] = []
    for event in events:
        if event.kind is EventKind.STUDENT_JOINED:
            sid = event.payload["student_id"]
            roster[sid] = StudentRecord(
                student_id=sid, display_name=event.payload.get("display_name", "")
            )
            order.append(sid)
        elif event.kind is EventKind.STUDENT_LEFT:
            sid = event.payload["student_id"]
            roster.pop(sid, None)
            pending.pop(sid, None)
            order.remove(sid)
        elif event.kind is EventKind.REACTION:
            sid = event.payload["student_id"]
            if sid in roster:
                pending[sid] = ReactionLabel(event.payload["reaction"])
        elif event.kind is EventKind.EVALUATION:
            records = [roster[sid] for sid in order]
            reactions = [pending.get(sid, ReactionLabel.NEUTRAL) for sid in order]
            evaluation = class_score(records, reactions, params, ts_ms=event.ts_ms)
            pairs.append((float(event.payload["r_class"]), evaluation.r_class))
            for sid, label in zip(order, reactions):
                roster[sid] = apply_reaction(roster[sid], label)
            pending.clear()
    return pairs
