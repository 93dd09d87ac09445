"""Turn raw model generations into validated belief states.

Generations are parsed leniently (quasi-dict lines, double quotes, JSON,
fenced blocks, junk lines) and then held to the training-data contract:
free-text values must be substrings of the conversation and categorical
values must be one of the allowed values.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Mapping, Sequence, Tuple

from rapidfuzz.distance import Levenshtein

from slotfill.backends.base import CompletionBackend, CompletionRequest
from slotfill.nlp.core import BeliefState, Conversation, SlotLibrary
from slotfill.nlp.promptgen import DEFAULT_BUDGET, WHITESPACE, TokenBudget, TokenCounter, render_prompt

logger = logging.getLogger(__name__)

DEFAULT_FUZZY_THRESHOLD = 0.8


class WarningReason(str, Enum):
    DROPPED_NOT_SUBSTRING = "DroppedNotSubstring"
    MAPPED_TO_ALLOWED_VALUE = "MappedToAllowedValue"
    DROPPED_NO_ALLOWED_MATCH = "DroppedNoAllowedMatch"
    UNKNOWN_SLOT_ID = "UnknownSlotId"
    UNPARSEABLE_LINE = "UnparseableLine"
    DUPLICATE_SLOT_KEPT_LAST = "DuplicateSlotKeptLast"
    REPAIRED_TO_SUBSTRING = "RepairedToSubstring"


@dataclass(frozen=True)
class ParseWarning:
    target: str  # slot id or "line N"
    reason: WarningReason

    def to_json(self) -> Dict[str, str]:
        return {"target": self.target, "reason": self.reason.value}


@dataclass(frozen=True)
class RawGeneration:
    values: Dict[str, str]
    warnings: Tuple[ParseWarning, ...] = ()


@dataclass(frozen=True)
class ParseOutcome:
    state: BeliefState
    warnings: Tuple[ParseWarning, ...] = ()


@dataclass(frozen=True)
class Extraction:
    outcome: ParseOutcome
    latency_s: float
    prompt: str
    generation: str
    dropped_turn_count: int = 0

    @property
    def state(self) -> BeliefState:
        return self.outcome.state

    @property
    def warnings(self) -> Tuple[ParseWarning, ...]:
        return self.outcome.warnings


# ------------------------- Lenient grammar -------------------------
_KEY = r"""(?P<kq>['"`]?)(?P<key>Slot-\d+)(?P=kq)"""
_SQ = r"'(?:[^']|'')*'"
_DQ = r'"(?:[^"\\]|\\.)*"'
_PAIR_RE = re.compile(rf"\s*{_KEY}\s*:\s*(?P<val>{_SQ}|{_DQ})\s*,?\s*")
_GREEDY_SQ_RE = re.compile(rf"^{_KEY}\s*:\s*'(?P<raw>.*)'\s*,?$")
_GREEDY_DQ_RE = re.compile(rf'^{_KEY}\s*:\s*"(?P<raw>.*)"\s*,?$')
_LIST_RE = re.compile(rf"^{_KEY}\s*:\s*\[\s*[`']?(?P<raw>.*?)'?\s*\]\s*,?$")
_BARE_RE = re.compile(rf"^{_KEY}\s*:\s*(?P<raw>[^'\"\[\s].*?)\s*,?$")
_FENCE_RE = re.compile(r"^\s*```[A-Za-z]*\s*$", re.MULTILINE)


class _Pairs(list):
    pass


_ESCAPE_RE = re.compile(r"\\([\\nr])")
_UNESCAPES = {"\\": "\\", "n": "\n", "r": "\r"}


def _unquote_single(raw: str) -> str:
    return _ESCAPE_RE.sub(lambda m: _UNESCAPES[m.group(1)], raw.replace("''", "'"))


def _unquote(token: str) -> str:
    if token.startswith("'"):
        return _unquote_single(token[1:-1])
    try:
        return json.loads(token)
    except ValueError:
        return token[1:-1]


def _scalar(value: Any) -> str | None:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, (int, float)):
        return str(value)
    if isinstance(value, list):
        for item in value:
            if isinstance(item, str):
                return item
    return None


def _parse_json_object(body: str) -> RawGeneration | None:
    candidates = [body]
    first, last = body.find("{"), body.rfind("}")
    if 0 < first < last:
        candidates.append(body[first : last + 1])
    for candidate in candidates:
        if not candidate.startswith("{"):
            continue
        try:
            parsed = json.loads(candidate, object_pairs_hook=_Pairs)
        except (ValueError, RecursionError):
            continue
        if not isinstance(parsed, _Pairs):
            continue
        values: Dict[str, str] = {}
        warnings: List[ParseWarning] = []
        for key, value in parsed:
            scalar = _scalar(value)
            if not isinstance(key, str) or scalar is None:
                warnings.append(ParseWarning(str(key), WarningReason.UNPARSEABLE_LINE))
                continue
            if key in values:
                warnings.append(ParseWarning(key, WarningReason.DUPLICATE_SLOT_KEPT_LAST))
                del values[key]
            values[key] = scalar
        return RawGeneration(values, tuple(warnings))
    return None


def _parse_line(line: str) -> List[Tuple[str, str]] | None:
    pairs: List[Tuple[str, str]] = []
    pos = 0
    while pos < len(line):
        m = _PAIR_RE.match(line, pos)
        if not m:
            break
        pairs.append((m.group("key"), _unquote(m.group("val"))))
        pos = m.end()
    if pairs and pos == len(line):
        return pairs

    m = _GREEDY_SQ_RE.match(line)
    if m:
        return [(m.group("key"), _unquote_single(m.group("raw")))]
    m = _GREEDY_DQ_RE.match(line)
    if m:
        return [(m.group("key"), m.group("raw"))]
    m = _LIST_RE.match(line)
    if m:
        return [(m.group("key"), _unquote_single(m.group("raw")))]
    m = _BARE_RE.match(line)
    if m:
        return [(m.group("key"), m.group("raw"))]
    return None


def parse_generation(text: str | bytes, library: SlotLibrary | None = None) -> RawGeneration:
    """Read slot/value pairs out of arbitrary model text. Never raises."""
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    elif not isinstance(text, str):
        text = str(text)
    body = _FENCE_RE.sub("", text).strip()
    if not body:
        return RawGeneration({}, ())

    parsed = _parse_json_object(body)
    if parsed is not None:
        return parsed

    values: Dict[str, str] = {}
    warnings: List[ParseWarning] = []
    for lineno, raw_line in enumerate(body.splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        pairs = _parse_line(line)
        if pairs is None:
            warnings.append(ParseWarning(f"line {lineno}", WarningReason.UNPARSEABLE_LINE))
            continue
        for key, value in pairs:
            if key in values:
                warnings.append(ParseWarning(key, WarningReason.DUPLICATE_SLOT_KEPT_LAST))
                del values[key]
            values[key] = value
    return RawGeneration(values, tuple(warnings))


# ------------------------- Validation -------------------------
def similarity(a: str, b: str) -> float:
    """1 - levenshtein(a, b) / max(|a|, |b|), case-folded."""
    a, b = a.casefold(), b.casefold()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - Levenshtein.distance(a, b) / longest


def map_to_allowed(value: str, allowed: Sequence[str], threshold: float = DEFAULT_FUZZY_THRESHOLD) -> Tuple[str | None, bool]:
    """Return (allowed value, was_mapped); (None, False) when nothing matches."""
    if value in allowed:
        return value, False
    folded = value.casefold()
    for option in allowed:
        if option.casefold() == folded:
            return option, True
    best, best_score = None, -1.0
    for option in allowed:
        score = similarity(value, option)
        if score >= threshold and score > best_score:
            best, best_score = option, score
    return (best, True) if best is not None else (None, False)


def repair_to_substring(value: str, conversation: Conversation, threshold: float = DEFAULT_FUZZY_THRESHOLD) -> str | None:
    """Longest word span of a single turn whose similarity to value clears threshold."""
    width = max(1, len(value.split()))
    best: str | None = None
    best_key = (-1, -1.0)
    for turn in conversation:
        spans = [(m.start(), m.end()) for m in re.finditer(r"\S+", turn.text)]
        for size in range(max(1, width - 2), width + 3):
            for i in range(len(spans) - size + 1):
                candidate = turn.text[spans[i][0] : spans[i + size - 1][1]]
                score = similarity(value, candidate)
                if score < threshold:
                    continue
                key = (len(candidate), score)
                if key > best_key:
                    best, best_key = candidate, key
    return best


def validate_and_normalize(
    raw: RawGeneration | Mapping[str, str] | BeliefState,
    library: SlotLibrary,
    conversation: Conversation,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
    repair_substring: bool = False,
) -> ParseOutcome:
    if isinstance(raw, RawGeneration):
        values, warnings = dict(raw.values), list(raw.warnings)
    elif isinstance(raw, BeliefState):
        values, warnings = raw.as_dict(), []
    else:
        values, warnings = dict(raw), []

    state: Dict[str, str] = {}
    for slot_id, value in values.items():
        spec = library.get(slot_id)
        if spec is None:
            warnings.append(ParseWarning(slot_id, WarningReason.UNKNOWN_SLOT_ID))
            continue
        candidate = (value if isinstance(value, str) else str(value)).strip()

        if spec.allowed_values is not None:
            mapped, was_mapped = map_to_allowed(candidate, spec.allowed_values, fuzzy_threshold)
            if mapped is None:
                warnings.append(ParseWarning(slot_id, WarningReason.DROPPED_NO_ALLOWED_MATCH))
                continue
            if was_mapped:
                warnings.append(ParseWarning(slot_id, WarningReason.MAPPED_TO_ALLOWED_VALUE))
            state[slot_id] = mapped
            continue

        if conversation.grounds(candidate):
            state[slot_id] = candidate
            continue
        if repair_substring and candidate:
            repaired = repair_to_substring(candidate, conversation, fuzzy_threshold)
            if repaired:
                warnings.append(ParseWarning(slot_id, WarningReason.REPAIRED_TO_SUBSTRING))
                state[slot_id] = repaired
                continue
        warnings.append(ParseWarning(slot_id, WarningReason.DROPPED_NOT_SUBSTRING))

    return ParseOutcome(BeliefState.of(state, library), tuple(warnings))


# ------------------------- Extraction -------------------------
def extract(
    library: SlotLibrary,
    conversation: Conversation,
    backend: CompletionBackend,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    *,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
    repair_substring: bool = False,
    stop_sequences: Sequence[str] = (),
    temperature: float = 0.0,
) -> Extraction:
    """render_prompt -> backend.complete -> parse_generation -> validate_and_normalize.

    Latency covers the backend call only.
    """
    rendered = render_prompt(library, conversation, budget, counter)
    req = CompletionRequest(
        prompt=rendered.text,
        max_new_tokens=budget.max_output_tokens,
        stop_sequences=tuple(stop_sequences),
        temperature=temperature,
    )
    t0 = time.perf_counter()
    completion = backend.complete(req)
    latency = time.perf_counter() - t0
    raw = parse_generation(completion.text, library)
    outcome = validate_and_normalize(raw, library, conversation, fuzzy_threshold, repair_substring)
    if outcome.warnings:
        logger.debug("extraction warnings: %s", [w.to_json() for w in outcome.warnings])
    return Extraction(outcome, latency, rendered.text, completion.text, rendered.dropped_turn_count)
