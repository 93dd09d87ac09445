"""Generate records whose key slot holds a long free-text value from a bank."""

from __future__ import annotations

import logging
import random
import string
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

from slotfill.data.augment.common import PipelineConfig, load_bank, rng_for
from slotfill.nlp.core import Category, Conversation, PromptRecord, Role, SlotLibrary, SlotSpec, Turn
from slotfill.nlp.promptgen import build_record

logger = logging.getLogger(__name__)

PIPELINE = "long-value"


def _order_id(rng: random.Random) -> str:
    return "".join(rng.choices(string.digits, k=4)) + "".join(rng.choices(string.ascii_uppercase, k=3))


def _policy_number(rng: random.Random) -> str:
    return "POL" + "".join(rng.choices(string.digits, k=7))


def _product(rng: random.Random) -> str:
    return rng.choice(("laptop", "router", "printer", "phone", "smart TV", "tablet", "wireless headset"))


def _hotel(rng: random.Random) -> str:
    return rng.choice(("Hotel Azura", "The Grand Pacific", "Lakeside Inn", "Harbor View Hotel", "Maple Lodge"))


@dataclass(frozen=True)
class LongValueTemplate:
    name: str
    bank: str
    library: Tuple[SlotSpec, ...]
    turns: Tuple[Tuple[Role, str], ...]  # text with {aux} and {value}
    aux: Callable[[random.Random], str]

    @property
    def aux_slot(self) -> str:
        return self.library[0].id

    @property
    def value_slot(self) -> str:
        return self.library[1].id


TEMPLATES: Tuple[LongValueTemplate, ...] = (
    LongValueTemplate(
        "order-cancellation",
        "cancellation_reasons.txt",
        (SlotSpec("Slot-34", "id of an order", "order_id"), SlotSpec("Slot-28", "cancellation reason", "cancellation_reason")),
        (
            (Role.USER, "I want to cancel my order {aux} as {value}"),
            (Role.SYSTEM, "sure, cancelled your order with ID {aux}."),
        ),
        _order_id,
    ),
    LongValueTemplate(
        "insurance-claim",
        "accident_descriptions.txt",
        (SlotSpec("Slot-129", "policy number", "policy_number"), SlotSpec("Slot-417", "description of the accident", "accident_description")),
        (
            (Role.USER, "I need to file a claim on my car insurance."),
            (Role.SYSTEM, "I can help with that. What is your policy number?"),
            (Role.USER, "It is {aux}."),
            (Role.SYSTEM, "Thanks. Please describe what happened."),
            (Role.USER, "{value}"),
        ),
        _policy_number,
    ),
    LongValueTemplate(
        "tech-support",
        "issue_descriptions.txt",
        (SlotSpec("Slot-281", "product with the issue", "product"), SlotSpec("Slot-793", "issue description", "issue_description")),
        (
            (Role.USER, "I need help with my {aux}."),
            (Role.SYSTEM, "Sorry to hear that. Can you describe the issue in more detail?"),
            (Role.USER, "{value}"),
        ),
        _product,
    ),
    LongValueTemplate(
        "hotel-reservation",
        "hotel_preferences.txt",
        (SlotSpec("Slot-609", "name of the hotel", "hotel_name"), SlotSpec("Slot-905", "preferences for the stay", "preferences")),
        (
            (Role.USER, "I'd like to book a room at {aux}."),
            (Role.SYSTEM, "Happy to help. Do you have any preferences for your stay?"),
            (Role.USER, "{value}"),
        ),
        _hotel,
    ),
)
TEMPLATES_BY_NAME: Dict[str, LongValueTemplate] = {t.name: t for t in TEMPLATES}


def build_long_value_record(
    template: LongValueTemplate,
    value: str,
    aux: str,
    config: PipelineConfig | None = None,
    record_id: str = "",
) -> PromptRecord:
    config = config or PipelineConfig()
    turns = tuple(Turn(role, text.format(aux=aux, value=value)) for role, text in template.turns)
    return build_record(
        SlotLibrary(template.library),
        Conversation(turns),
        {template.aux_slot: aux, template.value_slot: value},
        category=Category.LONG_VALUE,
        budget=config.budget,
        counter=config.token_counter,
        dialogue_id=record_id,
        record_id=record_id,
    )


def long_values(config: PipelineConfig | None = None, templates: Sequence[str] | None = None) -> List[PromptRecord]:
    """Sample min(limit, templates x bank entries) records from the cross product."""
    config = config or PipelineConfig()
    chosen = [TEMPLATES_BY_NAME[name] for name in templates] if templates else list(TEMPLATES)
    pool = [(t, entry) for t in chosen for entry in load_bank(config.banks_dir / t.bank)]
    picks = range(len(pool))
    if config.limit is not None and config.limit < len(pool):
        picks = sorted(rng_for(config, PIPELINE, "sample").sample(range(len(pool)), config.limit))

    records = []
    for index in picks:
        template, value = pool[index]
        record_id = f"{PIPELINE}:{template.name}:{index}"
        aux = template.aux(rng_for(config, PIPELINE, record_id))
        records.append(build_long_value_record(template, value, aux, config, record_id))
    logger.info("%s: generated %d records from %d candidates", PIPELINE, len(records), len(pool))
    return records
