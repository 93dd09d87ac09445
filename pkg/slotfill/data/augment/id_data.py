"""Inject an ID slot plus a system request and a user answer after the first turn."""

from __future__ import annotations

import random
import string
from typing import List, Sequence

from slotfill.data.augment.common import (
    PipelineConfig,
    dialogue_key,
    fresh_slot_ids,
    load_lexicon,
    map_records,
    promote,
    retired_ids,
    rng_for,
)
from slotfill.nlp.core import Category, Conversation, PromptRecord, Role, SlotSpec, Turn
from slotfill.nlp.promptgen import rebuild

PIPELINE = "id-data"
ID_FORMATS = ("digits", "letters", "alphanumeric")


def generate_id(rng: random.Random, fmt: str | None = None) -> str:
    fmt = fmt or rng.choice(ID_FORMATS)
    length = rng.randint(6, 10)
    if fmt == "digits":
        return "".join(rng.choices(string.digits, k=length))
    if fmt == "letters":
        return "".join(rng.choices(string.ascii_letters, k=length))
    if fmt != "alphanumeric":
        raise ValueError(f"unknown id format {fmt!r}")
    chars = [rng.choice(string.digits), rng.choice(string.ascii_letters)]
    chars += rng.choices(string.digits + string.ascii_letters, k=length - 2)
    rng.shuffle(chars)
    return "".join(chars)


def _transform(record: PromptRecord, config: PipelineConfig) -> PromptRecord | None:
    if config.id_probability <= 0:
        return None
    # decisions are per dialogue so every prefix record of a dialogue agrees
    rng = rng_for(config, PIPELINE, dialogue_key(record))
    if rng.random() >= config.id_probability:
        return None
    (slot_id,) = fresh_slot_ids(rng, PIPELINE, record.library, 1, retired_ids(record))
    description = rng.choice(load_lexicon("id_descriptions", config.lexicons_dir))
    request = rng.choice(load_lexicon("id_requests", config.lexicons_dir))
    value = generate_id(rng)

    turns = list(record.conversation.turns)
    turns[1:1] = [Turn(Role.SYSTEM, request), Turn(Role.USER, value)]
    gold = record.gold_state.as_dict()
    gold[slot_id] = value
    return rebuild(
        record,
        config.budget,
        config.token_counter,
        library=record.library.with_slot(SlotSpec(slot_id, description, "id")),
        conversation=Conversation(tuple(turns)),
        gold_state=gold,
        category=promote(record.category, Category.ID_DATA),
    )


def id_injection(records: Sequence[PromptRecord], config: PipelineConfig | None = None) -> List[PromptRecord]:
    config = config or PipelineConfig()
    return map_records(records, lambda r: _transform(r, config), config, PIPELINE)
