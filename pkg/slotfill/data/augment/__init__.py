"""Slot-type augmentation pipelines.

CLI names: multi-slot, long-value, categorical, name-split, id-data, address,
relation. Map pipelines return every input record (transformed or not);
multi-slot and long-value return only the records they generate.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Sequence

from slotfill.backends.base import CompletionBackend
from slotfill.data.augment.address import AddressParts, address_split, split_address
from slotfill.data.augment.categorical import categorical_confirm
from slotfill.data.augment.common import PIPELINE_NAMES, PipelineConfig
from slotfill.data.augment.id_data import id_injection
from slotfill.data.augment.long_value import long_values
from slotfill.data.augment.multi_slot import multi_slot
from slotfill.data.augment.name_split import NameParts, name_split, split_name
from slotfill.data.augment.relation import relation_injection
from slotfill.data.augment.split import split_dataset
from slotfill.errors import UsageError
from slotfill.nlp.core import PromptRecord

MAP_PIPELINES: Dict[str, Callable[[Sequence[PromptRecord], PipelineConfig], List[PromptRecord]]] = {
    "categorical": categorical_confirm,
    "name-split": name_split,
    "id-data": id_injection,
    "address": address_split,
    "relation": relation_injection,
}


def run_pipeline(
    name: str,
    records: Sequence[PromptRecord],
    config: PipelineConfig | None = None,
    paraphraser: CompletionBackend | None = None,
) -> List[PromptRecord]:
    config = config or PipelineConfig()
    if name == "multi-slot":
        return multi_slot(records, config, paraphraser)
    if name == "long-value":
        return long_values(config)
    if name in MAP_PIPELINES:
        return MAP_PIPELINES[name](records, config)
    raise UsageError(f"unknown pipeline {name!r} (known: {', '.join(PIPELINE_NAMES)})")


__all__ = [
    "AddressParts",
    "NameParts",
    "PIPELINE_NAMES",
    "PipelineConfig",
    "address_split",
    "categorical_confirm",
    "id_injection",
    "long_values",
    "multi_slot",
    "name_split",
    "relation_injection",
    "run_pipeline",
    "split_address",
    "split_dataset",
    "split_name",
]
