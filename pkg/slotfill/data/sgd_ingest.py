"""Read Schema-Guided Dialogue corpora and write PromptRecord datasets.

Expected layout (the public SGD release):

    <dir>/schema.json
    <dir>/dialogues_001.json
    <dir>/dialogues_002.json ...

One record is produced per user turn, with the cumulative dialogue state at
that turn as gold.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

from slotfill.errors import BudgetImpossible, DataError, IdSpaceExhausted, MalformedJson, MalformedLine, MissingSchema, UnknownService
from slotfill.nlp.core import BeliefState, Category, Conversation, PromptRecord, Role, SlotLibrary, SlotSpec, Split, Turn
from slotfill.nlp.promptgen import DEFAULT_BUDGET, WHITESPACE, TokenBudget, TokenCounter, build_record

logger = logging.getLogger(__name__)

ID_SPACE = 1000
DONTCARE = "dontcare"


@dataclass(frozen=True)
class SgdSlot:
    name: str
    description: str
    is_categorical: bool = False
    possible_values: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SgdIntent:
    name: str
    required_slots: Tuple[str, ...] = ()
    optional_slots: Tuple[str, ...] = ()


@dataclass(frozen=True)
class SgdSchema:
    service_name: str
    slots: Tuple[SgdSlot, ...]
    intents: Tuple[SgdIntent, ...] = ()
    description: str = ""

    def trackable_slots(self) -> List[SgdSlot]:
        """Slots some intent requires or accepts, in schema order."""
        wanted = set()
        for intent in self.intents:
            wanted.update(intent.required_slots)
            wanted.update(intent.optional_slots)
        if not wanted:
            return list(self.slots)
        return [s for s in self.slots if s.name in wanted]


@dataclass(frozen=True)
class SgdFrame:
    service: str
    slot_values: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class SgdTurn:
    speaker: Role
    utterance: str
    frames: Tuple[SgdFrame, ...] = ()


@dataclass(frozen=True)
class SgdDialogue:
    dialogue_id: str
    services: Tuple[str, ...]
    turns: Tuple[SgdTurn, ...]


@dataclass
class SgdCorpus:
    dialogues: List[SgdDialogue]
    schemas: List[SgdSchema]

    def schema_index(self) -> Dict[str, SgdSchema]:
        return {s.service_name: s for s in self.schemas}


# ------------------------- Loading -------------------------
def _load_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MalformedJson(str(path), f"line {e.lineno} column {e.colno}", e.msg) from None


def _parse_schema(obj: Any, path: Path, index: int) -> SgdSchema:
    try:
        slots = tuple(
            SgdSlot(
                name=s["name"],
                description=s.get("description") or s["name"].replace("_", " "),
                is_categorical=bool(s.get("is_categorical", False)),
                possible_values=tuple(s.get("possible_values") or ()),
            )
            for s in obj["slots"]
        )
        intents = tuple(
            SgdIntent(
                name=i["name"],
                required_slots=tuple(i.get("required_slots") or ()),
                optional_slots=tuple(i.get("optional_slots") or {}),
            )
            for i in obj.get("intents", ())
        )
        return SgdSchema(obj["service_name"], slots, intents, obj.get("description", ""))
    except (KeyError, TypeError, AttributeError) as e:
        raise MalformedJson(str(path), f"record {index}", f"bad schema entry ({e!r})") from None


def _parse_dialogue(obj: Any, path: Path, index: int, services: Mapping[str, SgdSchema]) -> SgdDialogue:
    try:
        dialogue_id = str(obj["dialogue_id"])
        turns = []
        for turn in obj["turns"]:
            frames = []
            for frame in turn.get("frames", ()):
                service = frame["service"]
                if service not in services:
                    raise UnknownService(str(path), dialogue_id, service)
                state = (frame.get("state") or {}).get("slot_values") or {}
                values = {slot: tuple(vals) for slot, vals in state.items()}
                frames.append(SgdFrame(service, values))
            turns.append(SgdTurn(Role(str(turn["speaker"]).upper()), turn["utterance"], tuple(frames)))
        declared = tuple(obj.get("services") or ())
        for service in declared:
            if service not in services:
                raise UnknownService(str(path), dialogue_id, service)
        return SgdDialogue(dialogue_id, declared, tuple(turns))
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        if isinstance(e, DataError):
            raise
        raise MalformedJson(str(path), f"record {index}", f"bad dialogue entry ({e!r})") from None


def load_schemas(directory: str | Path) -> List[SgdSchema]:
    schema_path = Path(directory) / "schema.json"
    if not schema_path.is_file():
        raise MissingSchema(str(directory))
    data = _load_json(schema_path)
    if not isinstance(data, list):
        raise MalformedJson(str(schema_path), "top level", "expected a list of services")
    return [_parse_schema(obj, schema_path, i) for i, obj in enumerate(data)]


def load_sgd(directory: str | Path, workers: int = 4) -> SgdCorpus:
    """Parse schema.json and every dialogues_*.json under directory."""
    directory = Path(directory)
    schemas = load_schemas(directory)
    services = {s.service_name: s for s in schemas}
    files = sorted(directory.glob("dialogues_*.json"))

    def _load_file(path: Path) -> List[SgdDialogue]:
        data = _load_json(path)
        if not isinstance(data, list):
            raise MalformedJson(str(path), "top level", "expected a list of dialogues")
        return [_parse_dialogue(obj, path, i, services) for i, obj in enumerate(data)]

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        per_file = list(pool.map(_load_file, files))
    dialogues = [d for chunk in per_file for d in chunk]
    logger.info("loaded %d dialogues from %d files in %s", len(dialogues), len(files), directory)
    return SgdCorpus(dialogues, schemas)


# ------------------------- Records -------------------------
def slot_key(service: str, slot: str) -> str:
    return f"{service}:{slot}"


def assign_slot_ids(schemas: Sequence[SgdSchema], id_assigner: random.Random | int = 0) -> Dict[str, str]:
    """Map every `Service:slot` key to a distinct `Slot-<n>`, n in 0..999.

    Keys are sorted before drawing so the mapping depends on the seed only.
    """
    rng = id_assigner if isinstance(id_assigner, random.Random) else random.Random(id_assigner)
    keys = sorted({slot_key(s.service_name, slot.name) for s in schemas for slot in s.trackable_slots()})
    if len(keys) > ID_SPACE:
        raise IdSpaceExhausted(len(keys), ID_SPACE)
    numbers = rng.sample(range(ID_SPACE), len(keys))
    return {key: f"Slot-{n}" for key, n in zip(keys, numbers)}


def _slot_spec(slot: SgdSlot, slot_id: str) -> SlotSpec:
    allowed = None
    if slot.is_categorical and len(set(slot.possible_values)) >= 2:
        allowed = tuple(dict.fromkeys(slot.possible_values))
    description = " ".join(slot.description.split())
    return SlotSpec(slot_id, description, slot.name, allowed)


def library_for(dialogue: SgdDialogue, schemas: Sequence[SgdSchema], slot_ids: Mapping[str, str]) -> Tuple[SlotLibrary, Dict[str, str]]:
    """Library of the dialogue's services in schema-file order, plus key -> id."""
    active = set(dialogue.services) or {f.service for t in dialogue.turns for f in t.frames}
    specs: List[SlotSpec] = []
    keys: Dict[str, str] = {}
    for schema in schemas:
        if schema.service_name not in active:
            continue
        for slot in schema.trackable_slots():
            key = slot_key(schema.service_name, slot.name)
            specs.append(_slot_spec(slot, slot_ids[key]))
            keys[key] = slot_ids[key]
    return SlotLibrary(tuple(specs)), keys


def dialogue_records(
    dialogue: SgdDialogue,
    schemas: Sequence[SgdSchema],
    slot_ids: Mapping[str, str],
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
) -> List[PromptRecord]:
    library, keys = library_for(dialogue, schemas, slot_ids)
    if len(library) == 0:
        return []
    running: Dict[str, Dict[str, Tuple[str, ...]]] = {}
    turns: List[Turn] = []
    records: List[PromptRecord] = []
    for index, sgd_turn in enumerate(dialogue.turns):
        if not sgd_turn.utterance.strip():
            continue
        turns.append(Turn(sgd_turn.speaker, sgd_turn.utterance))
        if sgd_turn.speaker is not Role.USER:
            continue
        for frame in sgd_turn.frames:
            running[frame.service] = dict(frame.slot_values)

        gold: Dict[str, str] = {}
        alternatives: Dict[str, Tuple[str, ...]] = {}
        flags: List[str] = []
        for service, values in running.items():
            for slot, options in values.items():
                slot_id = keys.get(slot_key(service, slot))
                if slot_id is None or not options:
                    continue
                spec = library.get(slot_id)
                usable = tuple(o for o in options if o and o != DONTCARE)
                if spec.allowed_values is not None:
                    usable = tuple(o for o in usable if o in spec.allowed_values)
                if not usable:
                    flags.append(f"DontCare:{slot_id}")
                    continue
                gold[slot_id] = usable[0]
                if len(usable) > 1:
                    alternatives[slot_id] = usable

        record_id = f"{dialogue.dialogue_id}:{index}"
        try:
            record = build_record(
                library,
                Conversation(tuple(turns)),
                gold,
                category=Category.SGD,
                budget=budget,
                counter=counter,
                dialogue_id=dialogue.dialogue_id,
                record_id=record_id,
                alternatives=alternatives,
                flags=flags,
            )
        except BudgetImpossible as e:
            logger.warning("skipping %s: %s", record_id, e)
            continue
        for flag in record.flags:
            if flag.startswith("NotSubstring:"):
                logger.warning("%s: gold value of %s is not in the conversation", record_id, flag.partition(":")[2])
        records.append(record)
    return records


def to_records(
    dialogues: Iterable[SgdDialogue],
    schemas: Sequence[SgdSchema],
    id_assigner: random.Random | int = 0,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    slot_ids: Mapping[str, str] | None = None,
) -> List[PromptRecord]:
    if slot_ids is None:
        slot_ids = assign_slot_ids(schemas, id_assigner)
    records: List[PromptRecord] = []
    for dialogue in dialogues:
        records.extend(dialogue_records(dialogue, schemas, slot_ids, budget, counter))
    logger.info("built %d SGD records", len(records))
    return records


def write_slot_map(path: str | Path, seed: int, slot_ids: Mapping[str, str]) -> None:
    inverse = {slot_id: key for key, slot_id in sorted(slot_ids.items(), key=lambda kv: int(kv[1].split("-")[1]))}
    Path(path).write_text(json.dumps({"seed": seed, "slots": inverse}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def ingest_sgd(
    directory: str | Path,
    output: str | Path,
    seed: int = 0,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    workers: int = 4,
) -> List[PromptRecord]:
    """load_sgd -> to_records -> write_jsonl, plus slot_map.json beside the output."""
    corpus = load_sgd(directory, workers=workers)
    slot_ids = assign_slot_ids(corpus.schemas, random.Random(seed))
    records = to_records(corpus.dialogues, corpus.schemas, budget=budget, counter=counter, slot_ids=slot_ids)
    write_jsonl(records, output)
    write_slot_map(Path(output).parent / "slot_map.json", seed, slot_ids)
    return records


# ------------------------- JSONL -------------------------
def record_to_json(record: PromptRecord) -> Dict[str, Any]:
    return {
        "prompt": record.prompt,
        "output": record.gold_output,
        "state": {slot_id: list(record.gold_alternatives(slot_id)) for slot_id, _ in record.gold_state.items()},
        "library": record.library.to_json(),
        "conversation": record.conversation.to_json(),
        "category": record.category.value,
        "split": record.split.value,
        "dialogue_id": record.dialogue_id,
        "record_id": record.record_id,
        "flags": list(record.flags),
    }


def record_from_json(obj: Mapping[str, Any]) -> PromptRecord:
    library = SlotLibrary.from_json(obj["library"])
    conversation = Conversation.from_json(obj["conversation"])
    values: Dict[str, str] = {}
    alternatives: Dict[str, Tuple[str, ...]] = {}
    for slot_id, options in obj["state"].items():
        if isinstance(options, str):
            options = [options]
        if not options:
            continue
        values[slot_id] = options[0]
        if len(options) > 1:
            alternatives[slot_id] = tuple(options)
    return PromptRecord(
        prompt=obj["prompt"],
        gold_output=obj["output"],
        gold_state=BeliefState.of(values, library),
        library=library,
        conversation=conversation,
        category=Category(obj.get("category", "SGD")),
        split=Split(obj.get("split", "TRAIN")),
        dialogue_id=obj.get("dialogue_id", ""),
        record_id=obj.get("record_id", ""),
        alternatives=alternatives,
        flags=tuple(obj.get("flags", ())),
    )


def write_jsonl(records: Iterable[PromptRecord], path: str | Path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_json(record), ensure_ascii=False))
            fh.write("\n")
            count += 1
    logger.debug("wrote %d records to %s", count, path)
    return count


def read_jsonl(path: str | Path) -> List[PromptRecord]:
    records: List[PromptRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_json(json.loads(line)))
            except json.JSONDecodeError as e:
                raise MalformedLine(str(path), lineno, e.msg) from None
            except (KeyError, TypeError, AttributeError, ValueError) as e:
                raise MalformedLine(str(path), lineno, str(e) or type(e).__name__) from None
    return records
