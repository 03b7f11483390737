"""Session protocol: one guide, N skiers, converging annotation state.

The session is a single-writer state machine: messages are handled one at a
time in arrival order, and every accepted state-changing envelope is appended
to a log whose replay reconstructs the session exactly. Everything the server
emits derives deterministically from the inbound message (even timestamps),
which is what makes the replay bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .alerts import fresh_track, step_alerts
from .annotation import (
    Annotation,
    AnnotationSchemaError,
    AnnotationStore,
    annotation_from_dict,
    annotation_to_dict,
    validate_annotation,
)
from .config import DEFAULT_OVERLAY_BUDGET, PROTOCOL_VERSION, SERVER_SENDER_ID
from .terrain import OutOfBoundsError, TerrainGrid
from .viewmodel import compute_overlays, overlay_set_to_dict, pose_from_dict

MSG_HELLO = "HELLO"
MSG_WELCOME = "WELCOME"
MSG_SNAPSHOT = "SNAPSHOT"
MSG_ANNOTATION_UPSERT = "ANNOTATION_UPSERT"
MSG_ANNOTATION_DELETE = "ANNOTATION_DELETE"
MSG_POSE = "POSE"
MSG_VIEW_STATE = "VIEW_STATE"
MSG_ALERT = "ALERT"
MSG_ERROR = "ERROR"
MSG_PING = "PING"
MSG_PONG = "PONG"

MESSAGE_TYPES = {
    MSG_HELLO, MSG_WELCOME, MSG_SNAPSHOT, MSG_ANNOTATION_UPSERT, MSG_ANNOTATION_DELETE,
    MSG_POSE, MSG_VIEW_STATE, MSG_ALERT, MSG_ERROR, MSG_PING, MSG_PONG,
}

ERR_ROLE_FORBIDDEN = "ROLE_FORBIDDEN"
ERR_TERRAIN_MISMATCH = "TERRAIN_MISMATCH"
ERR_BAD_MESSAGE = "BAD_MESSAGE"
ERR_GUIDE_TAKEN = "GUIDE_TAKEN"

ROLE_GUIDE = "guide"
ROLE_SKIER = "skier"


class ProtocolSchemaError(ValueError):
    """An envelope or payload fails structural validation."""


class CorruptLogError(Exception):
    """The event log is not a prefix of any authoritative session history."""


@dataclass(frozen=True)
class Envelope:
    v: int
    type: str
    seq: int
    session_id: str
    sender_id: str
    t_ms: int
    payload: dict = field(default_factory=dict)


def canonical_json(obj) -> str:
    """The one JSON form used everywhere determinism matters."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def envelope_to_dict(e: Envelope) -> dict:
    return {
        "v": e.v,
        "type": e.type,
        "seq": e.seq,
        "session_id": e.session_id,
        "sender_id": e.sender_id,
        "t_ms": e.t_ms,
        "payload": e.payload,
    }


def envelope_from_dict(doc: dict) -> Envelope:
    """Parse one wire frame; unknown extra fields are ignored."""
    if not isinstance(doc, dict):
        raise ProtocolSchemaError("envelope must be an object")
    try:
        v = doc["v"]
        mtype = doc["type"]
        seq = doc["seq"]
        sender = doc["sender_id"]
        t_ms = doc["t_ms"]
    except KeyError as missing:
        raise ProtocolSchemaError(f"envelope missing field {missing}")
    if not isinstance(v, int) or isinstance(v, bool):
        raise ProtocolSchemaError("v must be an integer")
    if not isinstance(mtype, str):
        raise ProtocolSchemaError("type must be a string")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
        raise ProtocolSchemaError("seq must be an integer >= 1")
    if not isinstance(sender, str) or not sender:
        raise ProtocolSchemaError("sender_id must be a non-empty string")
    if not isinstance(t_ms, int) or isinstance(t_ms, bool):
        raise ProtocolSchemaError("t_ms must be an integer")
    payload = doc.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolSchemaError("payload must be an object")
    session_id = doc.get("session_id", "")
    if not isinstance(session_id, str):
        raise ProtocolSchemaError("session_id must be a string")
    return Envelope(v, mtype, seq, session_id, sender, t_ms, payload)


Outbound = tuple[str, Envelope]  # (recipient sender_id, envelope)


class Session:
    """Authoritative session state plus the message handler that mutates it."""

    def __init__(
        self,
        grid: TerrainGrid,
        terrain_ref: str,
        session_id: Optional[str] = None,
        budget: int = DEFAULT_OVERLAY_BUDGET,
    ):
        self.grid = grid
        self.terrain_ref = terrain_ref
        # Deterministic id so a restarted server resumes the same session.
        self.session_id = session_id or f"s-{terrain_ref[:12]}"
        self.store = AnnotationStore()
        self.roles: dict[str, str] = {}
        self.tracks: dict = {}
        self.log: list[Envelope] = []
        self.last_seq: dict[str, int] = {}
        self.budget = budget
        self._server_seq = 0

    # -- outbound helpers -------------------------------------------------

    def _emit(self, mtype: str, payload: dict, t_ms: int) -> Envelope:
        self._server_seq += 1
        return Envelope(
            v=PROTOCOL_VERSION,
            type=mtype,
            seq=self._server_seq,
            session_id=self.session_id,
            sender_id=SERVER_SENDER_ID,
            t_ms=t_ms,
            payload=payload,
        )

    def make_error(self, code: str, detail: str, t_ms: int = 0) -> Envelope:
        """Server ERROR envelope for transport-level failures (bad frames)."""
        return self._emit(MSG_ERROR, {"code": code, "detail": detail}, t_ms)

    def _error(self, msg: Envelope, code: str, detail: str) -> list[Outbound]:
        return [(msg.sender_id, self.make_error(code, detail, msg.t_ms))]

    def _clients(self) -> list[str]:
        return sorted(self.roles)

    def _guide_id(self) -> Optional[str]:
        for sender, role in self.roles.items():
            if role == ROLE_GUIDE:
                return sender
        return None

    # -- the state machine --------------------------------------------------

    def handle_message(self, msg: Envelope) -> list[Outbound]:
        """Process one inbound envelope; returns routed outbound envelopes.

        Stale sequence numbers are dropped silently so redelivery is harmless;
        fresh but invalid messages consume their seq and earn an ERROR.
        """
        if msg.v != PROTOCOL_VERSION:
            return self._error(msg, ERR_BAD_MESSAGE, f"unsupported protocol version {msg.v}")
        if msg.sender_id == SERVER_SENDER_ID:
            return self._error(msg, ERR_BAD_MESSAGE, "sender_id 'server' is reserved")
        if msg.seq <= self.last_seq.get(msg.sender_id, 0):
            return []
        self.last_seq[msg.sender_id] = msg.seq

        if msg.type == MSG_HELLO:
            return self._handle_hello(msg)
        if msg.type in (MSG_ANNOTATION_UPSERT, MSG_ANNOTATION_DELETE):
            return self._handle_annotation(msg)
        if msg.type == MSG_POSE:
            return self._handle_pose(msg)
        if msg.type == MSG_PING:
            return [(msg.sender_id, self._emit(MSG_PONG, dict(msg.payload), msg.t_ms))]
        if msg.type in MESSAGE_TYPES:
            return self._error(msg, ERR_BAD_MESSAGE, f"{msg.type} is server-originated")
        return self._error(msg, ERR_BAD_MESSAGE, f"unknown message type {msg.type!r}")

    def _handle_hello(self, msg: Envelope) -> list[Outbound]:
        role = msg.payload.get("role")
        if role not in (ROLE_GUIDE, ROLE_SKIER):
            return self._error(msg, ERR_BAD_MESSAGE, f"unknown role {role!r}")
        terrain_hash = msg.payload.get("terrain_hash")
        if terrain_hash != self.terrain_ref:
            return self._error(
                msg, ERR_TERRAIN_MISMATCH, "client terrain does not match the session terrain"
            )
        existing = self.roles.get(msg.sender_id)
        if existing is not None and existing != role:
            return self._error(
                msg, ERR_ROLE_FORBIDDEN, f"{msg.sender_id} already joined as {existing}"
            )
        if role == ROLE_GUIDE:
            guide = self._guide_id()
            if guide is not None and guide != msg.sender_id:
                return self._error(msg, ERR_GUIDE_TAKEN, "the session already has a guide")

        self.roles[msg.sender_id] = role
        self.log.append(msg)
        welcome = self._emit(
            MSG_WELCOME,
            {"sender_id": msg.sender_id, "role": role, "session_id": self.session_id},
            msg.t_ms,
        )
        snapshot = self._emit(
            MSG_SNAPSHOT,
            {
                "annotations": [annotation_to_dict(a) for a in self.store.live()],
                "terrain_ref": self.terrain_ref,
            },
            msg.t_ms,
        )
        return [(msg.sender_id, welcome), (msg.sender_id, snapshot)]

    def _handle_annotation(self, msg: Envelope) -> list[Outbound]:
        if self.roles.get(msg.sender_id) != ROLE_GUIDE:
            return self._error(msg, ERR_ROLE_FORBIDDEN, "only the guide may edit annotations")
        try:
            annotation = annotation_from_dict(msg.payload.get("annotation"))
        except AnnotationSchemaError as bad:
            return self._error(msg, ERR_BAD_MESSAGE, str(bad))
        if msg.type == MSG_ANNOTATION_DELETE and not annotation.deleted:
            return self._error(msg, ERR_BAD_MESSAGE, "DELETE payload must be a tombstone")
        if msg.type == MSG_ANNOTATION_UPSERT and annotation.deleted:
            return self._error(msg, ERR_BAD_MESSAGE, "UPSERT payload must not be a tombstone")
        violations = validate_annotation(annotation, self.grid)
        if violations:
            detail = "; ".join(str(v) for v in violations)
            return self._error(msg, ERR_BAD_MESSAGE, detail)

        applied = self.store.merge(annotation)
        self.log.append(msg)
        if not applied:
            return []
        broadcast = self._emit(
            msg.type, {"annotation": annotation_to_dict(annotation)}, msg.t_ms
        )
        return [(client, broadcast) for client in self._clients()]

    def _handle_pose(self, msg: Envelope) -> list[Outbound]:
        if self.roles.get(msg.sender_id) != ROLE_SKIER:
            return self._error(msg, ERR_ROLE_FORBIDDEN, "only skiers send poses")
        try:
            pose = pose_from_dict(msg.payload.get("pose") or {})
            speed = float(msg.payload["speed"])
        except (KeyError, TypeError, ValueError) as bad:
            return self._error(msg, ERR_BAD_MESSAGE, f"malformed pose payload: {bad}")
        if not speed >= 0:
            return self._error(msg, ERR_BAD_MESSAGE, "speed must be >= 0")

        track = self.tracks.get(msg.sender_id)
        if track is None:
            track = fresh_track(msg.sender_id, pose, speed, msg.t_ms)
        try:
            track, events = step_alerts(track, self.store, self.grid, pose, speed, msg.t_ms)
        except (OutOfBoundsError, ValueError) as bad:
            return self._error(msg, ERR_BAD_MESSAGE, str(bad))
        self.tracks[msg.sender_id] = track
        self.log.append(msg)

        overlays = compute_overlays(self.store, self.grid, pose, self.budget)
        view_payload = {"skier_id": msg.sender_id, **overlay_set_to_dict(overlays)}
        view = self._emit(MSG_VIEW_STATE, view_payload, msg.t_ms)
        # The guide previews exactly what each skier sees, so the view state
        # goes to both; alerts likewise (the guide is monitoring).
        recipients = [msg.sender_id]
        guide = self._guide_id()
        if guide is not None:
            recipients.append(guide)
        out: list[Outbound] = [(r, view) for r in recipients]
        for event in events:
            alert = self._emit(MSG_ALERT, event.to_dict(), msg.t_ms)
            out.extend((r, alert) for r in recipients)
        return out


def replay_log(
    log: Iterable[Envelope],
    grid: TerrainGrid,
    terrain_ref: str,
    session_id: Optional[str] = None,
    budget: int = DEFAULT_OVERLAY_BUDGET,
    on_emit: Optional[Callable[[Outbound], None]] = None,
    into: Optional[Session] = None,
) -> Session:
    """Rebuild a session by re-running handle_message over an accepted log.

    The log must be a prefix of an authoritative history: any sequence
    regression, schema violation, or entry the state machine now rejects
    means the file is corrupt. ``into`` replays onto a pre-seeded session
    (the server seeds file annotations before its log).
    """
    session = into or Session(grid, terrain_ref, session_id=session_id, budget=budget)
    for index, env in enumerate(log):
        if env.seq <= session.last_seq.get(env.sender_id, 0):
            raise CorruptLogError(
                f"entry {index}: seq {env.seq} regressed for sender {env.sender_id}"
            )
        outbound = session.handle_message(env)
        for recipient, out in outbound:
            if out.type == MSG_ERROR:
                raise CorruptLogError(
                    f"entry {index}: rejected on replay: {out.payload.get('detail')}"
                )
            if on_emit is not None:
                on_emit((recipient, out))
    return session


def parse_log_lines(lines: Iterable[str]) -> list[Envelope]:
    """JSON Lines -> envelopes; raises CorruptLogError on any bad line."""
    out = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(envelope_from_dict(json.loads(line)))
        except (json.JSONDecodeError, ProtocolSchemaError) as bad:
            raise CorruptLogError(f"line {lineno}: {bad}")
    return out


class ClientOutbox:
    """Client-side envelope factory keeping the per-sender seq monotone."""

    def __init__(self, sender_id: str, session_id: str = ""):
        self.sender_id = sender_id
        self.session_id = session_id
        self.seq = 0

    def make(self, mtype: str, payload: dict, t_ms: int = 0) -> Envelope:
        self.seq += 1
        return Envelope(
            v=PROTOCOL_VERSION,
            type=mtype,
            seq=self.seq,
            session_id=self.session_id,
            sender_id=self.sender_id,
            t_ms=t_ms,
            payload=payload,
        )

    def hello(self, role: str, terrain_hash: str, t_ms: int = 0) -> Envelope:
        return self.make(MSG_HELLO, {"role": role, "terrain_hash": terrain_hash}, t_ms)

    def upsert(self, annotation: Annotation, t_ms: int = 0) -> Envelope:
        return self.make(
            MSG_ANNOTATION_UPSERT, {"annotation": annotation_to_dict(annotation)}, t_ms
        )

    def delete(self, tombstone: Annotation, t_ms: int = 0) -> Envelope:
        return self.make(
            MSG_ANNOTATION_DELETE, {"annotation": annotation_to_dict(tombstone)}, t_ms
        )

    def pose(self, pose_doc: dict, speed: float, t_ms: int) -> Envelope:
        return self.make(MSG_POSE, {"pose": pose_doc, "speed": speed}, t_ms)


@dataclass
class ClientMirror:
    """What a connected client knows; converges to the server store.

    Snapshots apply as merges, so overlapping snapshot/delta delivery is
    harmless under LWW.
    """

    store: AnnotationStore = field(default_factory=AnnotationStore)
    sender_id: Optional[str] = None
    session_id: Optional[str] = None
    terrain_ref: Optional[str] = None
    view_states: dict = field(default_factory=dict)  # skier_id -> latest payload
    alerts: list = field(default_factory=list)

    def apply(self, env: Envelope) -> None:
        if env.type == MSG_WELCOME:
            self.sender_id = env.payload.get("sender_id")
            self.session_id = env.payload.get("session_id")
        elif env.type == MSG_SNAPSHOT:
            self.terrain_ref = env.payload.get("terrain_ref")
            for doc in env.payload.get("annotations", []):
                self.store.merge(annotation_from_dict(doc))
        elif env.type in (MSG_ANNOTATION_UPSERT, MSG_ANNOTATION_DELETE):
            self.store.merge(annotation_from_dict(env.payload["annotation"]))
        elif env.type == MSG_VIEW_STATE:
            self.view_states[env.payload.get("skier_id")] = env.payload
        elif env.type == MSG_ALERT:
            self.alerts.append(env.payload)

    def live_view(self) -> dict:
        return {a.id: a for a in self.store.live()}
