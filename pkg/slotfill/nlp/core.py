"""Domain types shared by every slotfill module.

A conversation C_t, a slot library S and the belief state B_t that maps slot
ids to values. None is key absence: a BeliefState never holds empty strings or
sentinels for unfilled slots.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Dict, Iterator, List, Mapping, Sequence, Tuple

from slotfill.errors import InvalidSlotSpec, InvalidTurn, MixedLibrary

SLOT_ID_RE = re.compile(r"^Slot-\d+$")


class Role(str, Enum):
    USER = "USER"
    SYSTEM = "SYSTEM"


class Category(str, Enum):
    SGD = "SGD"
    MULTI_SLOT = "MULTI_SLOT"
    LONG_VALUE = "LONG_VALUE"
    CATEGORICAL = "CATEGORICAL"
    NAME_SPLIT = "NAME_SPLIT"
    ID_DATA = "ID_DATA"
    ADDRESS = "ADDRESS"
    RELATION = "RELATION"
    REALISTIC = "REALISTIC"


class Split(str, Enum):
    TRAIN = "TRAIN"
    VAL = "VAL"
    TEST = "TEST"


class UpdateMode(str, Enum):
    REPLACE = "REPLACE"
    MERGE = "MERGE"

    @classmethod
    def parse(cls, value: "str | UpdateMode") -> "UpdateMode":
        if isinstance(value, UpdateMode):
            return value
        return cls(str(value).strip().upper())


# ------------------------- Slots -------------------------
@dataclass(frozen=True)
class SlotSpec:
    id: str
    description: str
    name: str = ""
    allowed_values: Tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not SLOT_ID_RE.match(self.id):
            raise InvalidSlotSpec(f"slot id {self.id!r} does not match Slot-<digits>")
        if not isinstance(self.description, str) or not self.description.strip():
            raise InvalidSlotSpec(f"{self.id}: description is empty")
        if "\n" in self.description or "\r" in self.description:
            raise InvalidSlotSpec(f"{self.id}: description contains a newline")
        if self.allowed_values is not None:
            values = tuple(self.allowed_values)
            if any(not isinstance(v, str) or not v for v in values):
                raise InvalidSlotSpec(f"{self.id}: allowed values must be non-empty strings")
            if len(set(values)) < 2:
                raise InvalidSlotSpec(f"{self.id}: a categorical slot needs at least 2 distinct allowed values")
            object.__setattr__(self, "allowed_values", values)

    @property
    def categorical(self) -> bool:
        return self.allowed_values is not None

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "id": self.id,
            "description": self.description,
            "allowed_values": list(self.allowed_values) if self.allowed_values is not None else None,
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "SlotSpec":
        if not isinstance(obj, Mapping):
            raise InvalidSlotSpec(f"slot entry must be an object, got {type(obj).__name__}")
        allowed = obj.get("allowed_values")
        return cls(
            id=obj.get("id"),  # type: ignore[arg-type]
            description=obj.get("description"),  # type: ignore[arg-type]
            name=obj.get("name") or "",
            allowed_values=tuple(allowed) if allowed is not None else None,
        )


@dataclass(frozen=True)
class SlotLibrary:
    slots: Tuple[SlotSpec, ...] = ()

    def __post_init__(self) -> None:
        slots = tuple(self.slots)
        index: Dict[str, SlotSpec] = {}
        for spec in slots:
            if spec.id in index:
                raise InvalidSlotSpec(f"duplicate slot id {spec.id}")
            index[spec.id] = spec
        object.__setattr__(self, "slots", slots)
        object.__setattr__(self, "_index", index)

    def __iter__(self) -> Iterator[SlotSpec]:
        return iter(self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def __contains__(self, slot_id: object) -> bool:
        return slot_id in self._index  # type: ignore[attr-defined]

    def get(self, slot_id: str) -> SlotSpec | None:
        return self._index.get(slot_id)  # type: ignore[attr-defined]

    @property
    def ids(self) -> List[str]:
        return [s.id for s in self.slots]

    @property
    def fingerprint(self) -> str:
        payload = json.dumps([s.to_json() for s in self.slots], sort_keys=True, ensure_ascii=False)
        return hashlib.sha1(payload.encode("utf-8")).hexdigest()[:16]

    def replace_slot(self, slot_id: str, replacements: Sequence[SlotSpec]) -> "SlotLibrary":
        out: List[SlotSpec] = []
        for spec in self.slots:
            if spec.id == slot_id:
                out.extend(replacements)
            else:
                out.append(spec)
        return SlotLibrary(tuple(out))

    def with_slot(self, spec: SlotSpec) -> "SlotLibrary":
        return SlotLibrary(self.slots + (spec,))

    def to_json(self) -> List[Dict[str, Any]]:
        return [s.to_json() for s in self.slots]

    @classmethod
    def from_json(cls, items: Sequence[Mapping[str, Any]]) -> "SlotLibrary":
        if not isinstance(items, (list, tuple)):
            raise InvalidSlotSpec("slot library must be a list")
        return cls(tuple(SlotSpec.from_json(item) for item in items))


# ------------------------- Conversation -------------------------
@dataclass(frozen=True)
class Turn:
    role: Role
    text: str

    def __post_init__(self) -> None:
        try:
            role = self.role.upper() if isinstance(self.role, str) else self.role
            object.__setattr__(self, "role", Role(role))
        except ValueError:
            raise InvalidTurn(f"unknown role {self.role!r}") from None
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvalidTurn("turn text is empty")

    def render(self) -> str:
        return f"[{self.role.value}] {self.text}"


@dataclass(frozen=True)
class Conversation:
    turns: Tuple[Turn, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))

    def __len__(self) -> int:
        return len(self.turns)

    def __iter__(self) -> Iterator[Turn]:
        return iter(self.turns)

    def grounds(self, value: str) -> bool:
        """True when value occurs verbatim inside a single utterance."""
        return bool(value) and any(value in t.text for t in self.turns)

    def user_turns(self) -> List[Turn]:
        return [t for t in self.turns if t.role is Role.USER]

    def append(self, *turns: Turn) -> "Conversation":
        return Conversation(self.turns + tuple(turns))

    def to_json(self) -> List[Dict[str, str]]:
        return [{"role": t.role.value, "text": t.text} for t in self.turns]

    @classmethod
    def from_json(cls, items: Sequence[Mapping[str, Any]]) -> "Conversation":
        if not isinstance(items, (list, tuple)):
            raise InvalidTurn("conversation must be a list")
        turns = []
        for item in items:
            if not isinstance(item, Mapping):
                raise InvalidTurn("turn must be an object")
            turns.append(Turn(role=item.get("role"), text=item.get("text")))  # type: ignore[arg-type]
        return cls(tuple(turns))


# ------------------------- Belief state -------------------------
@dataclass(frozen=True, eq=False)
class BeliefState:
    values: Mapping[str, str] = field(default_factory=dict)
    library: str | None = None  # fingerprint of the governing SlotLibrary

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", MappingProxyType(dict(self.values)))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BeliefState):
            return dict(self.values) == dict(other.values)
        if isinstance(other, Mapping):
            return dict(self.values) == dict(other)
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __contains__(self, slot_id: object) -> bool:
        return slot_id in self.values

    def __len__(self) -> int:
        return len(self.values)

    def get(self, slot_id: str) -> str | None:
        return self.values.get(slot_id)

    def items(self):
        return self.values.items()

    def as_dict(self) -> Dict[str, str]:
        return dict(self.values)

    @classmethod
    def of(cls, values: Mapping[str, str], library: "SlotLibrary | None" = None) -> "BeliefState":
        return cls(values, library.fingerprint if library is not None else None)


def ensure_same_library(a: BeliefState, b: BeliefState) -> None:
    if a.library and b.library and a.library != b.library:
        raise MixedLibrary(a.library, b.library)


def belief_update(prev: BeliefState, extracted: BeliefState, mode: UpdateMode = UpdateMode.REPLACE) -> BeliefState:
    """Apply one turn's extraction to the running state.

    REPLACE trusts the full re-extraction; MERGE overwrites prev with every key
    present in extracted and cannot retract a value.
    """
    ensure_same_library(prev, extracted)
    if UpdateMode.parse(mode) is UpdateMode.REPLACE:
        return extracted
    merged = prev.as_dict()
    merged.update(extracted.values)
    return BeliefState(merged, prev.library or extracted.library)


class ViolationRule(str, Enum):
    UNKNOWN_SLOT = "UnknownSlot"
    NOT_IN_ALLOWED_VALUES = "NotInAllowedValues"
    EMPTY_VALUE = "EmptyValue"


@dataclass(frozen=True)
class Violation:
    slot_id: str
    rule: ViolationRule
    detail: str = ""


def validate_state(state: BeliefState, library: SlotLibrary) -> List[Violation]:
    violations: List[Violation] = []
    for slot_id, value in state.items():
        spec = library.get(slot_id)
        if spec is None:
            violations.append(Violation(slot_id, ViolationRule.UNKNOWN_SLOT))
            continue
        if not isinstance(value, str) or value == "":
            violations.append(Violation(slot_id, ViolationRule.EMPTY_VALUE))
            continue
        if spec.allowed_values is not None and value not in spec.allowed_values:
            violations.append(Violation(slot_id, ViolationRule.NOT_IN_ALLOWED_VALUES, value))
    return violations


# ------------------------- Records -------------------------
@dataclass(frozen=True)
class PromptRecord:
    prompt: str
    gold_output: str
    gold_state: BeliefState
    library: SlotLibrary
    conversation: Conversation
    category: Category = Category.SGD
    split: Split = Split.TRAIN
    dialogue_id: str = ""
    record_id: str = ""
    alternatives: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    flags: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "split", Split(self.split))
        alts = {k: tuple(v) for k, v in dict(self.alternatives).items()}
        object.__setattr__(self, "alternatives", MappingProxyType(alts))
        object.__setattr__(self, "flags", tuple(self.flags))

    def gold_alternatives(self, slot_id: str) -> Tuple[str, ...]:
        alts = self.alternatives.get(slot_id)
        if alts:
            return alts
        value = self.gold_state.get(slot_id)
        return (value,) if value is not None else ()

    def replace(self, **changes: Any) -> "PromptRecord":
        return dataclasses.replace(self, **changes)
