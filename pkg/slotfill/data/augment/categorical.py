"""Turn boolean categorical slots into explicit confirmation exchanges."""

from __future__ import annotations

from typing import List, Sequence, Tuple

from slotfill.data.augment.common import PipelineConfig, map_records, promote, rng_for
from slotfill.nlp.core import Category, Conversation, PromptRecord, Role, SlotSpec, Turn
from slotfill.nlp.promptgen import rebuild

PIPELINE = "categorical"
CONFIRM_VALUES = ("Yes, go ahead", "No")
CONFIRM_CLAUSE = 'Allowed values ("Yes, go ahead","No")'
CONFIRM_DESCRIPTION = f"Please confirm. {CONFIRM_CLAUSE}"
BOOLEAN_VALUES = frozenset({"True", "False"})

YES_ANSWERS = ("Yes.", "Yes, please.", "Sure, go ahead.", "That's right.", "Yes, that works.")
NO_ANSWERS = ("No.", "No, thanks.", "Not really.", "No, that's not right.")
DISTRACTORS: Tuple[Tuple[str, str], ...] = (
    ("Would you like to hear about our newsletter?", "No, thanks."),
    ("Is this your first time using our service?", "Yes, it is."),
    ("Shall I send you a reminder by text?", "Yes, sure."),
    ("Do you want to hear today's offers?", "No."),
    ("Is it okay if I put you on a short hold?", "Yes, that's fine."),
)


def is_boolean_slot(spec: SlotSpec) -> bool:
    return spec.allowed_values is not None and set(spec.allowed_values) == BOOLEAN_VALUES


def restatement(record: PromptRecord, skip: str) -> str:
    details = []
    for spec in record.library:
        value = record.gold_state.get(spec.id)
        if spec.id == skip or value is None or spec.allowed_values is not None:
            continue
        details.append(f"{spec.description.strip().rstrip('.?!').lower()}: {value}")
    summary = "; ".join(details) if details else "the details you gave me"
    return f"Please confirm the following: {summary}. {CONFIRM_CLAUSE}."


def _transform(record: PromptRecord, config: PipelineConfig) -> PromptRecord | None:
    target = next((s for s in record.library if is_boolean_slot(s) and s.id in record.gold_state), None)
    if target is None:
        return None
    rng = rng_for(config, PIPELINE, record.record_id or record.dialogue_id)
    answer_yes = record.gold_state.get(target.id) == "True"

    turns = list(record.conversation.turns)
    if config.distractor_rate > 0 and rng.random() < config.distractor_rate:
        question, reply = rng.choice(DISTRACTORS)
        turns += [Turn(Role.SYSTEM, question), Turn(Role.USER, reply)]
    answer = rng.choice(YES_ANSWERS if answer_yes else NO_ANSWERS)
    turns += [Turn(Role.SYSTEM, restatement(record, target.id)), Turn(Role.USER, answer)]

    gold = record.gold_state.as_dict()
    gold[target.id] = CONFIRM_VALUES[0] if answer_yes else CONFIRM_VALUES[1]
    confirm = SlotSpec(target.id, CONFIRM_DESCRIPTION, target.name, CONFIRM_VALUES)
    return rebuild(
        record,
        config.budget,
        config.token_counter,
        library=record.library.replace_slot(target.id, [confirm]),
        conversation=Conversation(tuple(turns)),
        gold_state=gold,
        category=promote(record.category, Category.CATEGORICAL),
    )


def categorical_confirm(records: Sequence[PromptRecord], config: PipelineConfig | None = None) -> List[PromptRecord]:
    config = config or PipelineConfig()
    return map_records(records, lambda r: _transform(r, config), config, PIPELINE)
