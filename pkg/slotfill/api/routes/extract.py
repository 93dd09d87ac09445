from __future__ import annotations

from typing import List

from fastapi import APIRouter, Request
from pydantic import BaseModel, Field

from slotfill.api.routes.common import SlotPayload, TurnPayload, conversation_of, http_error, library_of
from slotfill.api.services.tracker import record_backend_error, record_extraction
from slotfill.errors import BackendError, SlotFillError
from slotfill.nlp.outparse import extract

router = APIRouter()


class ExtractPayload(BaseModel):
    library: List[SlotPayload] = Field(min_length=1)
    conversation: List[TurnPayload] = Field(min_length=1)


@router.post("/extract")
def extract_endpoint(payload: ExtractPayload, request: Request):
    """Stateless extraction over one conversation."""
    tracker = request.app.state.tracker
    settings = tracker.settings
    try:
        library = library_of(payload.library)
        conversation = conversation_of(payload.conversation)
        result = extract(
            library,
            conversation,
            tracker.backend,
            settings.budget,
            settings.token_counter,
            fuzzy_threshold=settings.fuzzy_threshold,
            repair_substring=settings.repair_substring,
        )
    except BackendError as e:
        record_backend_error()
        raise http_error(e)
    except SlotFillError as e:
        raise http_error(e)
    record_extraction(result)
    return {
        "ok": True,
        "values": result.state.as_dict(),
        "warnings": [w.to_json() for w in result.warnings],
        "latency_s": result.latency_s,
        "dropped_turns": result.dropped_turn_count,
    }
