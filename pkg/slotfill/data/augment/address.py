"""Split address slots into house number, street, city and state-district."""

from __future__ import annotations

import logging
import re
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
from slotfill.errors import UnsplittableAddress
from slotfill.nlp.core import Category, PromptRecord, SlotSpec
from slotfill.nlp.promptgen import rebuild

logger = logging.getLogger(__name__)

PIPELINE = "address"
ADDRESS_KEYWORDS = ("address", "destination", "location")
PART_FIELDS = ("house_number", "street", "city", "state_district")
PART_DESCRIPTIONS = {
    "house_number": "house-number",
    "street": "street name",
    "city": "name of the city/town/village",
    "state_district": "state-district",
}
_HOUSE_RE = re.compile(r"^(\d+)\s+")


@dataclass(frozen=True)
class AddressParts:
    house_number: str | None = None
    street: str | None = None
    city: str | None = None
    state_district: str | None = None

    def present(self) -> List[Tuple[str, str]]:
        return [(f, getattr(self, f)) for f in PART_FIELDS if getattr(self, f)]


def split_address(address: str, street_types: Sequence[str] = ()) -> AddressParts:
    keywords = {k.casefold() for k in street_types or load_lexicon("street_types")}
    house = None
    rest = address.strip()
    m = _HOUSE_RE.match(rest)
    if m:
        house = m.group(1)
        rest = rest[m.end():]
    tokens = rest.split()
    last = -1
    for i, token in enumerate(tokens):
        if token.rstrip(".,").casefold() in keywords:
            last = i
    if last < 0:
        raise UnsplittableAddress(address)
    return AddressParts(
        house_number=house,
        street=" ".join(tokens[: last + 1]),
        city=tokens[last + 1] if last + 1 < len(tokens) else None,
        state_district=" ".join(tokens[last + 2 :]) or None,
    )


def is_address_slot(spec: SlotSpec) -> bool:
    name = spec.name.casefold()
    if name.endswith(tuple(f".{f}" for f in PART_FIELDS)):
        return False
    return spec.allowed_values is None and any(k in name for k in ADDRESS_KEYWORDS)


def _transform(record: PromptRecord, config: PipelineConfig) -> PromptRecord | None:
    gold = record.gold_state.as_dict()
    targets = [s for s in record.library if is_address_slot(s) and s.id in gold]
    if not targets:
        return None
    street_types = load_lexicon("street_types", config.lexicons_dir)
    rng = rng_for(config, PIPELINE, dialogue_key(record))
    library = record.library
    replaced: List[str] = []
    for spec in targets:
        value = gold[spec.id]
        if " ".join(value.split()) != value:
            continue
        try:
            parts = split_address(value, street_types)
        except UnsplittableAddress as e:
            logger.warning("%s: %s", record.record_id or "record", e)
            continue
        ids = fresh_slot_ids(rng, PIPELINE, library, len(PART_FIELDS), (*retired_ids(record), *replaced))
        replacements = [
            SlotSpec(slot_id, PART_DESCRIPTIONS[field], f"{spec.name}.{field}")
            for slot_id, field in zip(ids, PART_FIELDS)
        ]
        library = library.replace_slot(spec.id, replacements)
        replaced.append(spec.id)
        del gold[spec.id]
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
        category=promote(record.category, Category.ADDRESS),
        flags=retire(record, replaced),
    )


def address_split(records: Sequence[PromptRecord], config: PipelineConfig | None = None) -> List[PromptRecord]:
    config = config or PipelineConfig()
    return map_records(records, lambda r: _transform(r, config), config, PIPELINE)
