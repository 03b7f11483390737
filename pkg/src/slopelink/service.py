"""FastAPI service: the session server over WebSocket plus the terrain file.

The surface is intentionally tiny: ``GET /terrain.asc`` (read-only terrain
for clients to mesh and hash) and ``WS /ws`` carrying one JSON envelope per
frame. All session logic stays in :mod:`slopelink.protocol`; this layer only
does transport: framing, per-connection bookkeeping, heartbeat staleness,
and appending accepted envelopes to the session log file.
"""

from __future__ import annotations

import asyncio
import hashlib
import json
import logging
import time
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Callable, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import ValidationError

from .annotation import store_from_document, validate_annotation
from .config import (
    DEFAULT_OVERLAY_BUDGET,
    HEARTBEAT_INTERVAL_S,
    HEARTBEAT_TIMEOUT_S,
    PROTOCOL_VERSION,
)
from .protocol import (
    MSG_WELCOME,
    Envelope,
    Session,
    canonical_json,
    envelope_to_dict,
    parse_log_lines,
    replay_log,
)
from .terrain import load_terrain
from .wire import EnvelopeModel

log = logging.getLogger("slopelink.service")


class SessionRuntime:
    """Glue between the single-sequence session and concurrent sockets."""

    def __init__(
        self,
        session: Session,
        terrain_text: str,
        log_path: Optional[Path],
        time_fn: Callable[[], float],
    ):
        self.session = session
        self.terrain_text = terrain_text
        self.log_path = log_path
        self.time_fn = time_fn
        self.lock = asyncio.Lock()
        self.sockets: dict[str, WebSocket] = {}
        self.last_seen: dict[int, float] = {}  # id(websocket) -> monotonic seconds
        self._persisted = len(session.log)

    def _persist_new_entries(self) -> None:
        if self.log_path is None:
            return
        fresh = self.session.log[self._persisted:]
        if not fresh:
            return
        with self.log_path.open("a", encoding="utf-8") as fh:
            for env in fresh:
                fh.write(canonical_json(envelope_to_dict(env)) + "\n")
        self._persisted = len(self.session.log)

    async def _send(self, recipient: str, env: Envelope) -> None:
        ws = self.sockets.get(recipient)
        if ws is None:
            return
        try:
            await ws.send_text(canonical_json(envelope_to_dict(env)))
        except Exception:  # client vanished mid-send; the sweeper will reap it
            self.sockets.pop(recipient, None)

    async def handle_frame(self, ws: WebSocket, raw: str) -> bool:
        """Process one frame; returns False when the connection must close."""
        self.last_seen[id(ws)] = self.time_fn()
        async with self.lock:
            try:
                env = EnvelopeModel.model_validate(json.loads(raw)).to_envelope()
            except (json.JSONDecodeError, ValidationError) as bad:
                err = self.session.make_error("BAD_MESSAGE", f"unparseable frame: {bad}")
                await ws.send_text(canonical_json(envelope_to_dict(err)))
                return True
            outbound = self.session.handle_message(env)
            for recipient, out_env in outbound:
                if out_env.type == MSG_WELCOME and recipient == env.sender_id:
                    self.sockets[env.sender_id] = ws
            self._persist_new_entries()
            for recipient, out_env in outbound:
                if recipient == env.sender_id and self.sockets.get(recipient) is not ws:
                    # Sender not (or no longer) registered under its id:
                    # deliver replies on this socket directly.
                    try:
                        await ws.send_text(canonical_json(envelope_to_dict(out_env)))
                    except Exception:
                        pass
                else:
                    await self._send(recipient, out_env)
        return env.v == PROTOCOL_VERSION

    def drop_socket(self, ws: WebSocket) -> None:
        self.last_seen.pop(id(ws), None)
        for sender, socket in list(self.sockets.items()):
            if socket is ws:
                del self.sockets[sender]

    async def sweep_stale(self, timeout: float) -> list[WebSocket]:
        """Close sockets silent for longer than the heartbeat timeout."""
        now = self.time_fn()
        stale = []
        for sender, ws in list(self.sockets.items()):
            if now - self.last_seen.get(id(ws), now) > timeout:
                stale.append(ws)
                self.drop_socket(ws)
        for ws in stale:
            try:
                await ws.close(code=1001)
            except Exception:
                pass
        return stale


def build_session(
    terrain_path: Path,
    annotations_path: Optional[Path] = None,
    log_path: Optional[Path] = None,
    budget: int = DEFAULT_OVERLAY_BUDGET,
) -> tuple[Session, str]:
    """Load terrain + seed annotations, then replay any existing log."""
    terrain_text = terrain_path.read_text(encoding="utf-8")
    terrain_ref = hashlib.sha256(terrain_text.encode("utf-8")).hexdigest()
    grid = load_terrain(terrain_text)

    session = Session(grid, terrain_ref, budget=budget)
    if annotations_path is not None:
        store = store_from_document(json.loads(annotations_path.read_text(encoding="utf-8")))
        for annotation in store.entries.values():
            bad = validate_annotation(annotation, grid)
            if bad:
                raise ValueError(f"annotation {annotation.id}: {bad[0]}")
            session.store.merge(annotation)

    if log_path is not None and log_path.exists():
        entries = parse_log_lines(log_path.read_text(encoding="utf-8").splitlines())
        replay_log(entries, grid, terrain_ref, into=session)
        log.info("replayed %d log entries", len(entries))

    return session, terrain_text


def create_app(
    terrain_path: Path,
    annotations_path: Optional[Path] = None,
    log_path: Optional[Path] = None,
    budget: int = DEFAULT_OVERLAY_BUDGET,
    heartbeat_interval: Optional[float] = HEARTBEAT_INTERVAL_S,
    heartbeat_timeout: float = HEARTBEAT_TIMEOUT_S,
    time_fn: Callable[[], float] = time.monotonic,
) -> FastAPI:
    session, terrain_text = build_session(terrain_path, annotations_path, log_path, budget)
    runtime = SessionRuntime(session, terrain_text, log_path, time_fn)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        sweeper = None
        if heartbeat_interval is not None:

            async def sweep_loop():
                while True:
                    await asyncio.sleep(heartbeat_interval)
                    await runtime.sweep_stale(heartbeat_timeout)

            sweeper = asyncio.create_task(sweep_loop())
        yield
        if sweeper is not None:
            sweeper.cancel()

    app = FastAPI(title="slopelink", lifespan=lifespan)
    app.state.runtime = runtime

    @app.get("/terrain.asc", response_class=PlainTextResponse)
    async def terrain_file() -> str:
        return runtime.terrain_text

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        runtime.last_seen[id(ws)] = runtime.time_fn()
        try:
            while True:
                raw = await ws.receive_text()
                keep_open = await runtime.handle_frame(ws, raw)
                if not keep_open:
                    await ws.close(code=1002)
                    break
        except WebSocketDisconnect:
            pass
        finally:
            runtime.drop_socket(ws)

    return app
