"""Add a `relationship with receiver` slot to money-transfer style records.

With probability `relation_rate` a dialogue gets a `my <relation> ` phrase
inserted before the receiver's name; the slot is then annotated from the
leftmost `my <relation>` found in the user turns.
"""

from __future__ import annotations

import re
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

PIPELINE = "relation"
RECEIVER_KEYWORDS = ("receiver", "recipient")
RELATION_DESCRIPTION = "relationship with receiver"


def is_receiver_slot(spec: SlotSpec) -> bool:
    name = spec.name.casefold()
    return spec.allowed_values is None and any(k in name for k in RECEIVER_KEYWORDS)


def _pattern(relations: Sequence[str]) -> re.Pattern[str]:
    words = sorted(relations, key=len, reverse=True)
    return re.compile(r"\bmy (" + "|".join(re.escape(w) for w in words) + r")\b", re.IGNORECASE)


def find_relation(conversation: Conversation, relations: Sequence[str]) -> str | None:
    """Relation word of the leftmost `my <relation>` in the earliest user turn that has one."""
    pattern = _pattern(relations)
    for turn in conversation.user_turns():
        m = pattern.search(turn.text)
        if m:
            return m.group(1)
    return None


def inject_relation(conversation: Conversation, receiver_values: Sequence[str], relation: str) -> Conversation | None:
    """Insert `my <relation> ` before the first receiver value found in a user turn."""
    turns = list(conversation.turns)
    for i, turn in enumerate(turns):
        if turn.role is not Role.USER:
            continue
        hits = [turn.text.find(v) for v in receiver_values if v and v in turn.text]
        if not hits:
            continue
        at = min(hits)
        turns[i] = Turn(turn.role, f"{turn.text[:at]}my {relation} {turn.text[at:]}")
        return Conversation(tuple(turns))
    return None


def _transform(record: PromptRecord, config: PipelineConfig) -> PromptRecord | None:
    receivers = [s for s in record.library if is_receiver_slot(s)]
    if not receivers or any(s.description == RELATION_DESCRIPTION for s in record.library):
        return None
    relations = load_lexicon("relations", config.lexicons_dir)
    rng = rng_for(config, PIPELINE, dialogue_key(record))
    (slot_id,) = fresh_slot_ids(rng, PIPELINE, record.library, 1, retired_ids(record))
    inject = rng.random() < config.relation_rate
    relation = rng.choice(relations)

    conversation = record.conversation
    gold = record.gold_state.as_dict()
    if inject and find_relation(conversation, relations) is None:
        values = [gold[s.id] for s in receivers if s.id in gold]
        conversation = inject_relation(conversation, values, relation) or conversation
    found = find_relation(conversation, relations)
    if found is not None:
        gold[slot_id] = found

    # sits right after the first receiver slot
    anchor = receivers[0]
    library = record.library.replace_slot(anchor.id, [anchor, SlotSpec(slot_id, RELATION_DESCRIPTION, "relation")])
    return rebuild(
        record,
        config.budget,
        config.token_counter,
        library=library,
        conversation=conversation,
        gold_state=gold,
        category=promote(record.category, Category.RELATION),
    )


def relation_injection(records: Sequence[PromptRecord], config: PipelineConfig | None = None) -> List[PromptRecord]:
    config = config or PipelineConfig()
    return map_records(records, lambda r: _transform(r, config), config, PIPELINE)
