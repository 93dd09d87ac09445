from __future__ import annotations

import logging
from typing import List

from fastapi import HTTPException
from pydantic import BaseModel

from slotfill.errors import (
    BackendError,
    BudgetImpossible,
    HttpStatusError,
    InvalidSlotSpec,
    MalformedClause,
    SessionNotFound,
    SlotFillError,
)
from slotfill.nlp.core import Conversation, SlotLibrary
from slotfill.nlp.promptgen import library_from_json

logger = logging.getLogger(__name__)


class SlotPayload(BaseModel):
    id: str
    description: str
    name: str = ""
    allowed_values: List[str] | None = None


class TurnPayload(BaseModel):
    role: str
    text: str


def library_of(slots: List[SlotPayload]) -> SlotLibrary:
    return library_from_json([s.model_dump(exclude_none=True) for s in slots])


def conversation_of(turns: List[TurnPayload]) -> Conversation:
    return Conversation.from_json([t.model_dump() for t in turns])


def status_for(e: SlotFillError) -> int:
    if isinstance(e, SessionNotFound):
        return 404
    if isinstance(e, BackendError):
        return 502
    if isinstance(e, (InvalidSlotSpec, MalformedClause, BudgetImpossible)):
        return 422
    return 400


def http_error(e: SlotFillError) -> HTTPException:
    status = status_for(e)
    detail = e.to_dict()
    if isinstance(e, HttpStatusError):
        # the upstream body goes to the log only
        detail["message"] = f"backend answered HTTP {e.code}"
    if status >= 500:
        logger.warning("backend failure: %s", e)
    return HTTPException(status_code=status, detail=detail)
