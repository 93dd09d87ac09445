"""Split person-name slots into prefix/first/middle/last slots."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

from slotfill.data.augment.common import (
    PipelineConfig,
    dialogue_key,
    fresh_slot_ids,
    load_lexicon,
    map_records,
    promote,
    retire,
    retired_ids,
    rng_for,
)
from slotfill.nlp.core import Category, PromptRecord, SlotSpec
from slotfill.nlp.promptgen import rebuild

PIPELINE = "name-split"
PART_FIELDS = ("prefix", "first", "middle", "last")
PART_LABELS = {"prefix": "Prefix", "first": "First", "middle": "Middle", "last": "Last"}


@dataclass(frozen=True)
class NameParts:
    prefix: str | None = None
    first: str | None = None
    middle: str | None = None
    last: str | None = None

    def present(self) -> List[Tuple[str, str]]:
        return [(f, getattr(self, f)) for f in PART_FIELDS if getattr(self, f)]

    def joined(self) -> str:
        return " ".join(v for _, v in self.present())


def split_name(name: str, honorifics: Sequence[str] = ()) -> NameParts:
    tokens = name.split()
    if not tokens:
        return NameParts()
    honorifics = {h.casefold().rstrip(".") for h in honorifics or load_lexicon("honorifics")}
    prefix = None
    if tokens[0].endswith(".") or tokens[0].casefold() in honorifics:
        prefix, tokens = tokens[0], tokens[1:]
    if not tokens:
        return NameParts(prefix=prefix)
    if len(tokens) == 1:
        return NameParts(prefix=prefix, first=tokens[0])
    middle = " ".join(tokens[1:-1]) or None
    return NameParts(prefix=prefix, first=tokens[0], middle=middle, last=tokens[-1])


def is_name_slot(spec: SlotSpec) -> bool:
    if spec.name.endswith(tuple(f".{f}" for f in PART_FIELDS)):
        return False
    return spec.allowed_values is None and "name" in spec.name.casefold()


def _entity(slot_name: str) -> str:
    words = [w for w in slot_name.replace("-", "_").split("_") if w and w.casefold() != "name"]
    return " ".join(words)


def part_description(field: str, entity: str) -> str:
    if entity:
        return f"{PART_LABELS[field]} name of the {entity}"
    return f"{field} name"


def _transform(record: PromptRecord, config: PipelineConfig) -> PromptRecord | None:
    targets = [s for s in record.library if is_name_slot(s)]
    if not targets:
        return None
    rng = rng_for(config, PIPELINE, dialogue_key(record))
    library = record.library
    gold = record.gold_state.as_dict()
    honorifics = load_lexicon("honorifics", config.lexicons_dir)
    replaced: List[str] = []
    for spec in targets:
        value = gold.get(spec.id)
        if value is not None and " ".join(value.split()) != value:
            continue
        ids = fresh_slot_ids(rng, PIPELINE, library, len(PART_FIELDS), (*retired_ids(record), *replaced))
        entity = _entity(spec.name)
        replacements = [
            SlotSpec(slot_id, part_description(field, entity), f"{spec.name}.{field}")
            for slot_id, field in zip(ids, PART_FIELDS)
        ]
        library = library.replace_slot(spec.id, replacements)
        replaced.append(spec.id)
        if value is not None:
            del gold[spec.id]
            parts = split_name(value, honorifics)
            by_field = dict(zip(PART_FIELDS, ids))
            for field, part in parts.present():
                gold[by_field[field]] = part
    if not replaced:
        return None
    return rebuild(
        record,
        config.budget,
        config.token_counter,
        library=library,
        gold_state=gold,
        category=promote(record.category, Category.NAME_SPLIT),
        flags=retire(record, replaced),
    )


def name_split(records: Sequence[PromptRecord], config: PipelineConfig | None = None) -> List[PromptRecord]:
    config = config or PipelineConfig()
    return map_records(records, lambda r: _transform(r, config), config, PIPELINE)
