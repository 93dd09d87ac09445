"""Shared plumbing for the augmentation pipelines: config, seeded RNGs,
fresh slot ids, value banks and lexicons, and the record-map driver."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field

from slotfill.errors import BudgetImpossible, EmptyBank, IdSpaceExhausted
from slotfill.nlp.core import Category, PromptRecord, SlotLibrary
from slotfill.nlp.promptgen import TokenBudget, TokenCounter, resolve_counter

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent
BANKS_DIR = DATA_DIR / "banks"
LEXICONS_DIR = DATA_DIR / "lexicons"

PIPELINE_NAMES: Tuple[str, ...] = (
    "multi-slot",
    "long-value",
    "categorical",
    "name-split",
    "id-data",
    "address",
    "relation",
)
ID_SPACE = 1000
ID_CLASSES = 8

# low -> high; a composed record keeps the highest tag
CATEGORY_PRECEDENCE: Tuple[Category, ...] = (
    Category.SGD,
    Category.MULTI_SLOT,
    Category.CATEGORICAL,
    Category.ID_DATA,
    Category.NAME_SPLIT,
    Category.ADDRESS,
    Category.RELATION,
    Category.LONG_VALUE,
)


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    limit: int | None = Field(None, ge=0)
    id_probability: float = Field(0.5, ge=0, le=1)
    relation_rate: float = Field(0.5, ge=0, le=1)
    distractor_rate: float = Field(0.0, ge=0, le=1)
    min_confirmed_slots: int = Field(3, ge=1)
    banks_dir: Path = BANKS_DIR
    lexicons_dir: Path = LEXICONS_DIR
    max_prompt_tokens: int = Field(1200, ge=1)
    max_output_tokens: int = Field(270, ge=1)
    counter: str = "whitespace"
    keep_unchanged: bool = True
    workers: int = Field(1, ge=1)

    @property
    def budget(self) -> TokenBudget:
        return TokenBudget(self.max_prompt_tokens, self.max_output_tokens)

    @property
    def token_counter(self) -> TokenCounter:
        return resolve_counter(self.counter)


def promote(current: Category, new: Category) -> Category:
    return max(current, new, key=CATEGORY_PRECEDENCE.index)


def rng_for(config: PipelineConfig, pipeline: str, key: str) -> random.Random:
    return random.Random(f"{config.seed}:{pipeline}:{key}")


def dialogue_key(record: PromptRecord) -> str:
    return record.dialogue_id or record.record_id


RETIRED_FLAG = "Retired:"


def retired_ids(record: PromptRecord) -> Tuple[str, ...]:
    """Ids replaced by an earlier pipeline; fresh draws skip them."""
    return tuple(f[len(RETIRED_FLAG) :] for f in record.flags if f.startswith(RETIRED_FLAG))


def retire(record: PromptRecord, slot_ids: Iterable[str]) -> Tuple[str, ...]:
    """Record flags plus one sorted `Retired:` flag per replaced id."""
    kept = [f for f in record.flags if not f.startswith(RETIRED_FLAG)]
    retired = sorted({*retired_ids(record), *slot_ids})
    return (*kept, *(f"{RETIRED_FLAG}{sid}" for sid in retired))


def fresh_slot_ids(
    rng: random.Random,
    pipeline: str,
    library: SlotLibrary,
    k: int,
    reserved: Iterable[str] = (),
) -> List[str]:
    """Draw k unused ids from the pipeline's own residue class of 0..999."""
    residue = PIPELINE_NAMES.index(pipeline)
    taken = {*library.ids, *reserved}
    candidates = [n for n in range(residue, ID_SPACE, ID_CLASSES) if f"Slot-{n}" not in taken]
    if k > len(candidates):
        raise IdSpaceExhausted(k, len(candidates))
    return [f"Slot-{n}" for n in rng.sample(candidates, k)]


def _read_lines(path: Path) -> Tuple[str, ...]:
    lines = []
    for raw in path.read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return tuple(lines)


@lru_cache(maxsize=64)
def load_bank(path: Path) -> Tuple[str, ...]:
    entries = _read_lines(Path(path))
    if not entries:
        raise EmptyBank(str(path))
    return entries


@lru_cache(maxsize=64)
def load_lexicon(name: str, directory: Path = LEXICONS_DIR) -> Tuple[str, ...]:
    return _read_lines(Path(directory) / f"{name}.txt")


def map_records(
    records: Sequence[PromptRecord],
    transform: Callable[[PromptRecord], PromptRecord | None],
    config: PipelineConfig,
    pipeline: str,
) -> List[PromptRecord]:
    """Apply transform to every record; None means untouched.

    Results are re-assembled in input order whatever the worker count.
    `limit` caps how many records are transformed.
    """

    def _safe(record: PromptRecord) -> PromptRecord | None:
        try:
            return transform(record)
        except BudgetImpossible as e:
            logger.warning("%s: skipping %s: %s", pipeline, record.record_id or "record", e)
            return None

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_safe, records))
    else:
        results = [_safe(r) for r in records]

    out: List[PromptRecord] = []
    changed = 0
    for original, result in zip(records, results):
        if result is not None and (config.limit is None or changed < config.limit):
            changed += 1
            out.append(result)
        elif config.keep_unchanged:
            out.append(original)
    logger.info("%s: transformed %d of %d records", pipeline, changed, len(records))
    return out
