"""Pydantic boundary models for the WebSocket wire format.

Validation here is purely structural; semantic checks (roles, revisions,
geometry) live in the session state machine so they also apply to replay.
Extra fields are ignored for forward compatibility.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from .protocol import Envelope


class EnvelopeModel(BaseModel):
    model_config = ConfigDict(extra="ignore")

    v: int
    type: str
    seq: int = Field(ge=1)
    session_id: str = ""
    sender_id: str = Field(min_length=1)
    t_ms: int
    payload: dict = Field(default_factory=dict)

    def to_envelope(self) -> Envelope:
        return Envelope(
            v=self.v,
            type=self.type,
            seq=self.seq,
            session_id=self.session_id,
            sender_id=self.sender_id,
            t_ms=self.t_ms,
            payload=self.payload,
        )
