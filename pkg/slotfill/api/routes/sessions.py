from __future__ import annotations

from typing import List

from fastapi import APIRouter, Request
from pydantic import BaseModel, Field, field_validator

from slotfill.api.routes.common import SlotPayload, http_error, library_of
from slotfill.api.services.tracker import Session, SessionTracker
from slotfill.errors import SlotFillError
from slotfill.nlp.core import UpdateMode

router = APIRouter()


class SessionPayload(BaseModel):
    library: List[SlotPayload] = Field(min_length=1)
    mode: UpdateMode | None = None

    @field_validator("mode", mode="before")
    @classmethod
    def _parse_mode(cls, value):
        return UpdateMode.parse(value) if isinstance(value, str) else value


class TurnRequest(BaseModel):
    user_text: str
    system_text: str | None = None


def _tracker(request: Request) -> SessionTracker:
    return request.app.state.tracker


def _state_view(session: Session) -> dict:
    return {
        "session_id": session.id,
        "state": session.state.as_dict(),
        "mode": session.mode.value,
        "turns": len(session.conversation),
        "updated": session.updated,
    }


@router.post("/sessions")
def create_session(payload: SessionPayload, request: Request):
    try:
        session = _tracker(request).create(library_of(payload.library), payload.mode)
    except SlotFillError as e:
        raise http_error(e)
    return {"ok": True, "session_id": session.id, "mode": session.mode.value}


@router.post("/sessions/{session_id}/turns")
def add_turn(session_id: str, payload: TurnRequest, request: Request):
    try:
        outcome = _tracker(request).track(session_id, payload.user_text, payload.system_text)
    except SlotFillError as e:
        raise http_error(e)
    return {
        "ok": True,
        **_state_view(outcome.session),
        "delta": {k: {"old": old, "new": new} for k, (old, new) in outcome.delta.items()},
        "warnings": [w.to_json() for w in outcome.extraction.warnings],
        "latency_s": outcome.extraction.latency_s,
    }


@router.get("/sessions/{session_id}/state")
def get_state(session_id: str, request: Request):
    try:
        session = _tracker(request).get(session_id)
    except SlotFillError as e:
        raise http_error(e)
    return {"ok": True, **_state_view(session)}


@router.delete("/sessions/{session_id}")
def delete_session(session_id: str, request: Request):
    try:
        _tracker(request).delete(session_id)
    except SlotFillError as e:
        raise http_error(e)
    return {"ok": True, "session_id": session_id}
