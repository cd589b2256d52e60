"""Trace replay client: plays recorded client message streams at a server.

A trace is JSON Lines of client->server messages; ``ts_ms`` fields are
relative to stream start and set the pacing (scaled by ``speed``).  One
invocation replays one student stream; run several for a full classroom.
"""
from __future__ import annotations

import json
import logging
import time
from pathlib import Path
from typing import Any

from .errors import ReplayParseError

log = logging.getLogger(__name__)


def load_trace(path: str | Path) -> list[dict[str, Any]]:
    messages: list[dict[str, Any]] = []
    path = Path(path)
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except ValueError as exc:
            raise ReplayParseError(str(path), lineno, f"corrupt trace line: {exc}") from None
        if not isinstance(obj, dict) or "type" not in obj:
            raise ReplayParseError(str(path), lineno, "trace lines must be message objects")
        messages.append(obj)
    return messages


def play_trace(
    trace_path: str | Path,
    target: str,
    classroom: str | None = None,
    speed: float = 1.0,
) -> int:
    """Stream the trace to ws://target/ws; returns the message count sent.

    ``classroom`` overrides the classroom field of the trace's join
    message.  Raises OSError/ConnectionError when the server is
    unreachable.
    """
    from websockets.sync.client import connect

    if speed <= 0:
        raise ValueError("speed must be positive")
    messages = load_trace(trace_path)
    sent = 0
    last_ts: int | None = None
    with connect(f"ws://{target}/ws") as ws:
        for msg in messages:
            if classroom is not None and msg.get("type") == "join":
                msg = {**msg, "classroom": classroom}
            ts = msg.get("ts_ms")
            if ts is not None and last_ts is not None and ts > last_ts:
                time.sleep((ts - last_ts) / 1000.0 / speed)
            if ts is not None:
                last_ts = int(ts)
            ws.send(json.dumps(msg))
            sent += 1
            if msg.get("type") == "join":
                reply = json.loads(ws.recv(timeout=10))
                if reply.get("type") == "error":
                    raise ConnectionError(f"join rejected: {reply.get('detail')}")
                log.info("joined as %s", reply.get("student_id"))
    return sent
