from __future__ import annotations

import logging
import random
from typing import Dict, List, Sequence, Tuple

from slotfill.data.augment.common import dialogue_key
from slotfill.errors import ConfigError
from slotfill.nlp.core import PromptRecord, Split

logger = logging.getLogger(__name__)


def parse_ratios(text: str) -> Tuple[float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigError(f"ratios must be three comma-separated numbers, got {text!r}") from None
    return check_ratios(parts)


def check_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three non-negative ratios (train, val, test), got {tuple(ratios)}")
    if abs(sum(ratios) - 1.0) > 1e-6:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios):.6f}")
    return (float(ratios[0]), float(ratios[1]), float(ratios[2]))


def split_dataset(records: Sequence[PromptRecord], ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0) -> List[PromptRecord]:
    """Tag records TRAIN/VAL/TEST by source dialogue so no dialogue straddles splits."""
    train, val, _ = check_ratios(ratios)
    keys = sorted({dialogue_key(r) for r in records})
    random.Random(seed).shuffle(keys)
    n_train = min(len(keys), round(train * len(keys)))
    n_val = min(len(keys) - n_train, round(val * len(keys)))
    assignment: Dict[str, Split] = {}
    for i, key in enumerate(keys):
        if i < n_train:
            assignment[key] = Split.TRAIN
        elif i < n_train + n_val:
            assignment[key] = Split.VAL
        else:
            assignment[key] = Split.TEST
    logger.info("split %d dialogues: %d train, %d val, %d test", len(keys), n_train, n_val, len(keys) - n_train - n_val)
    return [r.replace(split=assignment[dialogue_key(r)]) for r in records]


def partition(records: Sequence[PromptRecord]) -> Dict[Split, List[PromptRecord]]:
    parts: Dict[Split, List[PromptRecord]] = {s: [] for s in Split}
    for record in records:
        parts[record.split].append(record)
    return parts
