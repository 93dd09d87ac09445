"""Prompt and output rendering in the fine-tuning wire format.

    Find all the slots and their values from conversation.

    <slot library>
    Slot-211: first name
    Slot-196: add phone number. Allowed values ("Yes", "No")

    <conversation>
    [USER] I'd like to register

Slot names never reach the prompt; only ids and descriptions do. When the
prompt exceeds the token budget, whole turns are dropped oldest-first.
"""

from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Sequence, Tuple

from slotfill.errors import BudgetImpossible, ConfigError, InvalidSlotSpec, InvalidState, InvalidTurn, MalformedClause
from slotfill.nlp.core import (
    BeliefState,
    Category,
    Conversation,
    PromptRecord,
    SlotLibrary,
    SlotSpec,
    Split,
    validate_state,
)

logger = logging.getLogger(__name__)

INSTRUCTION = "Find all the slots and their values from conversation. "
LIBRARY_TAG = "<slot library>"
CONVERSATION_TAG = "<conversation>"
ALLOWED_CLAUSE = "Allowed values ("

# flags recomputed on every build
_DERIVED_FLAG_PREFIXES = ("NotSubstring:", "DroppedTurns:", "OutputOverBudget")


@dataclass(frozen=True)
class TokenBudget:
    max_prompt_tokens: int = 1200
    max_output_tokens: int = 270

    def __post_init__(self) -> None:
        if int(self.max_prompt_tokens) < 1 or int(self.max_output_tokens) < 1:
            raise ConfigError("token budgets must be >= 1")


@dataclass(frozen=True)
class TokenCounter:
    name: str
    fn: Callable[[str], int]
    additive: bool = False  # count(a + "\n" + b) == count(a) + count(b)

    def __call__(self, text: str) -> int:
        return int(self.fn(text))


def _whitespace_count(text: str) -> int:
    return len(text.split())


def _chars4_count(text: str) -> int:
    return (len(text) + 3) // 4


WHITESPACE = TokenCounter("whitespace", _whitespace_count, additive=True)
CHARS4 = TokenCounter("chars4", _chars4_count)
DEFAULT_BUDGET = TokenBudget()

_COUNTERS: Dict[str, TokenCounter] = {WHITESPACE.name: WHITESPACE, CHARS4.name: CHARS4}


def register_counter(name: str, fn: Callable[[str], int], additive: bool = False) -> TokenCounter:
    counter = TokenCounter(name, fn, additive)
    _COUNTERS[name] = counter
    return counter


def resolve_counter(spec: "str | TokenCounter | None") -> TokenCounter:
    """Look up a counter by registry name or import it from `module:attr`."""
    if spec is None:
        return WHITESPACE
    if isinstance(spec, TokenCounter):
        return spec
    if spec in _COUNTERS:
        return _COUNTERS[spec]
    if ":" in spec:
        module_name, _, attr = spec.partition(":")
        try:
            obj = getattr(importlib.import_module(module_name), attr)
        except (ImportError, AttributeError) as e:
            raise ConfigError(f"cannot load token counter {spec!r}: {e}") from e
        if isinstance(obj, TokenCounter):
            counter = obj
        elif callable(obj):
            counter = TokenCounter(spec, obj)
        else:
            raise ConfigError(f"token counter {spec!r} is not callable")
        _COUNTERS[spec] = counter
        return counter
    raise ConfigError(f"unknown token counter {spec!r} (known: {', '.join(sorted(_COUNTERS))})")


# ------------------------- Allowed-values clause -------------------------
def parse_allowed_values(description: str) -> List[str] | None:
    """Quoted items of a trailing `Allowed values ("a", "b")` clause, or None."""
    start = description.rfind(ALLOWED_CLAUSE)
    if start < 0:
        return None
    i = start + len(ALLOWED_CLAUSE)
    n = len(description)
    items: List[str] = []
    while True:
        while i < n and description[i] == " ":
            i += 1
        if i >= n:
            raise MalformedClause(f"unterminated clause in {description!r}")
        if description[i] == ")" and not items:
            raise MalformedClause(f"empty clause in {description!r}")
        if description[i] != '"':
            raise MalformedClause(f"expected a quoted value at offset {i} in {description!r}")
        end = description.find('"', i + 1)
        if end < 0:
            raise MalformedClause(f"unbalanced quote in {description!r}")
        items.append(description[i + 1 : end])
        i = end + 1
        while i < n and description[i] == " ":
            i += 1
        if i >= n:
            raise MalformedClause(f"unterminated clause in {description!r}")
        if description[i] == ",":
            i += 1
            continue
        if description[i] == ")":
            break
        raise MalformedClause(f"unexpected {description[i]!r} at offset {i} in {description!r}")
    if description[i + 1 :].strip() not in ("", "."):
        return None
    return items


def _has_clause(description: str) -> bool:
    try:
        return parse_allowed_values(description) is not None
    except MalformedClause:
        return True


def format_allowed_values(values: Sequence[str]) -> str:
    return ALLOWED_CLAUSE + ", ".join(f'"{v}"' for v in values) + ")"


def library_from_json(items: Sequence[Mapping]) -> SlotLibrary:
    """Build a library from a JSON payload, reading allowed values out of
    descriptions that carry the clause but no explicit list."""
    if not isinstance(items, (list, tuple)):
        raise InvalidSlotSpec("slot library must be a list")
    slots = []
    for item in items:
        spec = SlotSpec.from_json(item)
        if spec.allowed_values is None:
            parsed = parse_allowed_values(spec.description)
            if parsed is not None:
                spec = SlotSpec(spec.id, spec.description, spec.name, tuple(parsed))
        slots.append(spec)
    return SlotLibrary(tuple(slots))


# ------------------------- Prompt -------------------------
@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    dropped_turn_count: int


def render_slot_line(spec: SlotSpec) -> str:
    description = spec.description
    if spec.allowed_values is not None and not _has_clause(description):
        stem = description.rstrip()
        sep = " " if stem.endswith((".", "?", "!")) else ". "
        description = f"{stem}{sep}{format_allowed_values(spec.allowed_values)}"
    return f"{spec.id}: {description}"


def render_header(library: SlotLibrary) -> str:
    slot_lines = "\n".join(render_slot_line(s) for s in library)
    return f"{INSTRUCTION}\n\n{LIBRARY_TAG}\n{slot_lines}\n\n{CONVERSATION_TAG}"


def render_prompt(
    library: SlotLibrary,
    conversation: Conversation,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
) -> RenderedPrompt:
    if len(library) == 0:
        raise InvalidSlotSpec("slot library is empty")
    if len(conversation) == 0:
        raise InvalidTurn("conversation is empty")
    header = render_header(library)
    lines = [t.render() for t in conversation.turns]
    limit = budget.max_prompt_tokens

    if counter.additive:
        costs = [counter(line) for line in lines]
        total = counter(header) + sum(costs)
        dropped = 0
        while total > limit and dropped < len(lines) - 1:
            total -= costs[dropped]
            dropped += 1
        if total > limit:
            raise BudgetImpossible(total, limit)
        return RenderedPrompt(header + "\n" + "\n".join(lines[dropped:]), dropped)

    text = ""
    for dropped in range(len(lines)):
        text = header + "\n" + "\n".join(lines[dropped:])
        if counter(text) <= limit:
            return RenderedPrompt(text, dropped)
    raise BudgetImpossible(counter(text), limit)


# ------------------------- Output -------------------------
_ESCAPES = str.maketrans({"\\": "\\\\", "\n": "\\n", "\r": "\\r"})


def quote_value(value: str) -> str:
    """Single-quote a value: `'` doubles, backslash and line breaks are backslash-escaped."""
    return "'" + value.translate(_ESCAPES).replace("'", "''") + "'"


def format_pairs(pairs: Iterable[Tuple[str, str]]) -> str:
    return ",\n".join(f"'{slot_id}': {quote_value(value)}" for slot_id, value in pairs)


def render_output(state: BeliefState, library: SlotLibrary) -> str:
    violations = validate_state(state, library)
    if violations:
        v = violations[0]
        raise InvalidState(f"{v.slot_id}: {v.rule.value} {v.detail}".strip())
    return format_pairs((s.id, state.values[s.id]) for s in library if s.id in state)


# ------------------------- Records -------------------------
def substring_violations(state: BeliefState, library: SlotLibrary, conversation: Conversation) -> List[str]:
    """Ids of free-text values that do not occur verbatim in the conversation."""
    out = []
    for slot_id, value in state.items():
        spec = library.get(slot_id)
        if spec is not None and not spec.categorical and not conversation.grounds(value.strip()):
            out.append(slot_id)
    return out


def build_record(
    library: SlotLibrary,
    conversation: Conversation,
    gold: Mapping[str, str] | BeliefState,
    *,
    category: Category = Category.SGD,
    split: Split = Split.TRAIN,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    dialogue_id: str = "",
    record_id: str = "",
    alternatives: Mapping[str, Sequence[str]] | None = None,
    flags: Sequence[str] = (),
) -> PromptRecord:
    """Render prompt and gold output and attach data-quality flags."""
    values = gold.as_dict() if isinstance(gold, BeliefState) else dict(gold)
    state = BeliefState.of(values, library)
    rendered = render_prompt(library, conversation, budget, counter)
    output = render_output(state, library)

    kept = [f for f in flags if not f.startswith(_DERIVED_FLAG_PREFIXES)]
    kept.extend(f"NotSubstring:{sid}" for sid in substring_violations(state, library, conversation))
    if rendered.dropped_turn_count:
        kept.append(f"DroppedTurns:{rendered.dropped_turn_count}")
    if counter(output) > budget.max_output_tokens:
        kept.append("OutputOverBudget")
        logger.debug("gold output of %s exceeds %d tokens", record_id or "record", budget.max_output_tokens)

    alts = {}
    for slot_id, options in (alternatives or {}).items():
        options = tuple(options)
        if slot_id in values and options and options[0] == values[slot_id]:
            alts[slot_id] = options
    return PromptRecord(
        prompt=rendered.text,
        gold_output=output,
        gold_state=state,
        library=library,
        conversation=conversation,
        category=category,
        split=split,
        dialogue_id=dialogue_id,
        record_id=record_id,
        alternatives=alts,
        flags=tuple(dict.fromkeys(kept)),
    )


def rebuild(record: PromptRecord, budget: TokenBudget = DEFAULT_BUDGET, counter: TokenCounter = WHITESPACE, **changes) -> PromptRecord:
    """Re-render a record after its library, conversation or gold changed."""
    gold = changes.pop("gold_state", record.gold_state)
    alternatives = changes.pop("alternatives", record.alternatives)
    return build_record(
        changes.pop("library", record.library),
        changes.pop("conversation", record.conversation),
        gold,
        category=changes.pop("category", record.category),
        split=changes.pop("split", record.split),
        budget=budget,
        counter=counter,
        dialogue_id=changes.pop("dialogue_id", record.dialogue_id),
        record_id=changes.pop("record_id", record.record_id),
        alternatives=alternatives,
        flags=changes.pop("flags", record.flags),
    )
