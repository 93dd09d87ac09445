"""Fold a system confirmation summary into a single user turn carrying every value."""

from __future__ import annotations

import logging
from typing import List, Sequence, Tuple

from slotfill.backends.base import CompletionBackend, CompletionRequest
from slotfill.data.augment.common import PipelineConfig, promote
from slotfill.errors import BackendError, BudgetImpossible
from slotfill.nlp.core import Category, Conversation, PromptRecord, Role, SlotSpec, Turn
from slotfill.nlp.promptgen import rebuild

logger = logging.getLogger(__name__)

PIPELINE = "multi-slot"
CONFIRM_MARKER = "confirm"
PARAPHRASE_INSTRUCTION = (
    "Rewrite the assistant's confirmation below as a single request spoken by the user. "
    "Keep every value exactly as written.\n\n"
)


def confirmed_values(record: PromptRecord) -> Tuple[Turn | None, List[Tuple[SlotSpec, str]]]:
    """The system turn just before the last user turn, if it is a confirmation,
    and the gold values it mentions."""
    turns = record.conversation.turns
    if len(turns) < 2 or turns[-2].role is not Role.SYSTEM:
        return None, []
    summary = turns[-2]
    if CONFIRM_MARKER not in summary.text.casefold():
        return None, []
    folded = summary.text.casefold()
    found = []
    for spec in record.library:
        value = record.gold_state.get(spec.id)
        if value is not None and value.casefold() in folded:
            found.append((spec, value))
    return summary, found


def _phrase(spec: SlotSpec, value: str) -> str:
    description = spec.description
    if spec.allowed_values is not None:
        description = description.split(". Allowed values", 1)[0]
    description = description.strip().rstrip(".?!")
    return f"{description[:1].lower()}{description[1:]} {value}"


def template_utterance(pairs: Sequence[Tuple[SlotSpec, str]]) -> str:
    """`I need <desc_1> <v_1>, <desc_2> <v_2>, ...`"""
    return "I need " + ", ".join(_phrase(spec, value) for spec, value in pairs) + "."


def paraphrase_utterance(backend: CompletionBackend, summary: str, values: Sequence[str]) -> str | None:
    try:
        text = backend.complete(CompletionRequest(PARAPHRASE_INSTRUCTION + summary, max_new_tokens=120)).text
    except BackendError as e:
        logger.warning("paraphrase failed, using template: %s", e)
        return None
    text = " ".join(text.split())
    if not text or any(v not in text for v in values):
        return None
    return text


def multi_slot(
    records: Sequence[PromptRecord],
    config: PipelineConfig | None = None,
    paraphraser: CompletionBackend | None = None,
) -> List[PromptRecord]:
    """New MULTI_SLOT records; input records without a qualifying confirmation yield nothing."""
    config = config or PipelineConfig()
    out: List[PromptRecord] = []
    for record in records:
        if config.limit is not None and len(out) >= config.limit:
            break
        summary, pairs = confirmed_values(record)
        if summary is None or len(pairs) < config.min_confirmed_slots:
            continue
        text = None
        if paraphraser is not None:
            text = paraphrase_utterance(paraphraser, summary.text, [v for _, v in pairs])
        if text is None:
            text = template_utterance(pairs)
        try:
            new = rebuild(
                record,
                config.budget,
                config.token_counter,
                conversation=Conversation((Turn(Role.USER, text),)),
                gold_state={spec.id: value for spec, value in pairs},
                alternatives={},
                flags=(),
                category=promote(record.category, Category.MULTI_SLOT),
                record_id=f"{record.record_id}:{PIPELINE}" if record.record_id else "",
            )
        except BudgetImpossible as e:
            logger.warning("%s: skipping %s: %s", PIPELINE, record.record_id or "record", e)
            continue
        out.append(new)
    logger.info("%s: %d records from %d inputs", PIPELINE, len(out), len(records))
    return out
