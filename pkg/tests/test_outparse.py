from __future__ import annotations

import random
import string
from pathlib import Path

import pytest

from slotfill.backends.local import MockDelayBackend, OracleBackend
from slotfill.nlp.core import BeliefState, Conversation, Role, SlotLibrary, SlotSpec, Turn, validate_state
from slotfill.nlp.outparse import (
    WarningReason,
    extract,
    map_to_allowed,
    parse_generation,
    similarity,
    validate_and_normalize,
)
from slotfill.nlp.promptgen import render_output

BUS_LIBRARY = SlotLibrary(
    (
        SlotSpec("Slot-5", "City where bus is leaving from"),
        SlotSpec("Slot-182", "Number of travelers for journey", allowed_values=("1", "2", "3", "4", "5")),
        SlotSpec("Slot-53", "Date of bus leaving"),
        SlotSpec("Slot-57", "Time of bus leaving"),
        SlotSpec("Slot-24", "City where bus is going to"),
    )
)
BUS_CONVERSATION = Conversation(
    (
        Turn(Role.USER, "I need 4 bus tickets from long beach to Fresno on March 10th at 1:40 pm."),
    )
)
CONFIRM = SlotLibrary((SlotSpec("Slot-63", "Please confirm", allowed_values=("Yes, go ahead", "No")),))


def _reasons(outcome):
    return [(w.target, w.reason) for w in outcome.warnings]


def test_parses_figure_output(money):
    raw = parse_generation(money.output, money.library)
    assert raw.values == money.gold
    assert raw.warnings == ()


def test_accepts_missing_and_trailing_commas(registration):
    generation = (Path(__file__).parent / "fixtures" / "registration.generation.txt").read_text(encoding="utf-8")
    assert parse_generation(generation).values == registration.gold


def test_empty_text_gives_empty_map():
    assert parse_generation("").values == {}
    assert parse_generation("   \n").values == {}


def test_json_object_form():
    assert parse_generation('{"Slot-5": "long beach"}').values == {"Slot-5": "long beach"}


def test_fenced_json_and_several_pairs_per_line():
    text = "```json\n{\"Slot-1\": \"a\", \"Slot-2\": \"b\"}\n```"
    assert parse_generation(text).values == {"Slot-1": "a", "Slot-2": "b"}
    assert parse_generation("'Slot-1': 'a', 'Slot-2': 'b'").values == {"Slot-1": "a", "Slot-2": "b"}


def test_doubled_quote_is_undone():
    assert parse_generation("'Slot-9': 'O''Brien'").values == {"Slot-9": "O'Brien"}


def test_junk_lines_and_duplicates_are_warned():
    raw = parse_generation("Here you go:\n'Slot-1': 'a',\n'Slot-1': 'b'")
    assert raw.values == {"Slot-1": "b"}
    assert ("line 1", WarningReason.UNPARSEABLE_LINE) in [(w.target, w.reason) for w in raw.warnings]
    assert ("Slot-1", WarningReason.DUPLICATE_SLOT_KEPT_LAST) in [(w.target, w.reason) for w in raw.warnings]


def test_case_insensitive_categorical_mapping_is_warned():
    outcome = validate_and_normalize({"Slot-63": "yes, go ahead"}, CONFIRM, Conversation((Turn(Role.USER, "Yes."),)))
    assert outcome.state == {"Slot-63": "Yes, go ahead"}
    assert _reasons(outcome) == [("Slot-63", WarningReason.MAPPED_TO_ALLOWED_VALUE)]


def test_fuzzy_categorical_mapping_and_drop():
    assert map_to_allowed("Yes go ahead", ("Yes, go ahead", "No")) == ("Yes, go ahead", True)
    assert map_to_allowed("maybe later", ("Yes, go ahead", "No")) == (None, False)
    outcome = validate_and_normalize({"Slot-63": "maybe later"}, CONFIRM, Conversation((Turn(Role.USER, "hm"),)))
    assert outcome.state == {}
    assert _reasons(outcome) == [("Slot-63", WarningReason.DROPPED_NO_ALLOWED_MATCH)]


def test_substring_check_keeps_verbatim_values():
    outcome = validate_and_normalize({"Slot-5": "long beach"}, BUS_LIBRARY, BUS_CONVERSATION)
    assert outcome.state == {"Slot-5": "long beach"}
    assert outcome.warnings == ()


def test_substring_check_drops_absent_values():
    outcome = validate_and_normalize({"Slot-24": "San Jose"}, BUS_LIBRARY, BUS_CONVERSATION)
    assert outcome.state == {}
    assert _reasons(outcome) == [("Slot-24", WarningReason.DROPPED_NOT_SUBSTRING)]


def test_substring_check_is_case_sensitive():
    outcome = validate_and_normalize({"Slot-5": "Long Beach"}, BUS_LIBRARY, BUS_CONVERSATION)
    assert outcome.state == {}


def test_repair_mode_snaps_to_conversation_text():
    outcome = validate_and_normalize({"Slot-5": "Long Beach"}, BUS_LIBRARY, BUS_CONVERSATION, repair_substring=True)
    assert outcome.state == {"Slot-5": "long beach"}
    assert _reasons(outcome) == [("Slot-5", WarningReason.REPAIRED_TO_SUBSTRING)]


def test_unknown_slot_is_dropped():
    outcome = validate_and_normalize({"Slot-777": "x"}, BUS_LIBRARY, BUS_CONVERSATION)
    assert _reasons(outcome) == [("Slot-777", WarningReason.UNKNOWN_SLOT_ID)]


def test_normalization_is_idempotent():
    raw = {"Slot-5": " long beach ", "Slot-182": "four", "Slot-24": "Fresno", "Slot-1": "x"}
    once = validate_and_normalize(raw, BUS_LIBRARY, BUS_CONVERSATION)
    twice = validate_and_normalize(once.state, BUS_LIBRARY, BUS_CONVERSATION)
    assert twice.state == once.state
    assert twice.warnings == ()


def test_similarity_is_casefolded():
    assert similarity("ABC", "abc") == 1.0
    assert similarity("", "") == 1.0
    assert similarity("abcd", "abce") == pytest.approx(0.75)


def test_render_then_parse_round_trip(figures):
    for fig in figures:
        raw = parse_generation(render_output(BeliefState(fig.gold), fig.library), fig.library)
        assert validate_and_normalize(raw, fig.library, fig.conversation).state == fig.gold


RIDE_LIBRARY = SlotLibrary((SlotSpec("Slot-1", "Destination of the ride"), SlotSpec("Slot-2", "Name of the rider")))


def test_line_breaks_and_backslashes_survive_the_output_format():
    conversation = Conversation(
        (
            Turn(Role.USER, "Take me to 11 Hickson Road\nWalsh Bay, gate C:\\north."),
            Turn(Role.SYSTEM, "Who is riding?"),
            Turn(Role.USER, "Jim"),
        )
    )
    state = BeliefState({"Slot-1": "11 Hickson Road\nWalsh Bay, gate C:\\north", "Slot-2": "Jim"})
    text = render_output(state, RIDE_LIBRARY)
    assert text == "'Slot-1': '11 Hickson Road\\nWalsh Bay, gate C:\\\\north',\n'Slot-2': 'Jim'"
    raw = parse_generation(text, RIDE_LIBRARY)
    assert raw.warnings == ()
    outcome = validate_and_normalize(raw, RIDE_LIBRARY, conversation)
    assert outcome.state == state
    assert outcome.warnings == ()


def test_values_spanning_two_turns_are_not_grounded():
    conversation = Conversation((Turn(Role.USER, "I want to stay in"), Turn(Role.USER, "Paris for a week")))
    outcome = validate_and_normalize({"Slot-1": "in\nParis", "Slot-2": "Paris"}, RIDE_LIBRARY, conversation)
    assert outcome.state == {"Slot-2": "Paris"}
    assert _reasons(outcome) == [("Slot-1", WarningReason.DROPPED_NOT_SUBSTRING)]


def test_extract_with_oracle_returns_gold(money):
    record = money.record()
    extraction = extract(money.library, money.conversation, OracleBackend([record]))
    assert extraction.state == money.gold
    assert extraction.generation == money.output


def test_extract_with_empty_generation_gives_empty_state(money):
    extraction = extract(money.library, money.conversation, MockDelayBackend(0.0))
    assert extraction.state == {}
    assert extraction.warnings == ()


def test_latency_covers_the_backend_call():
    extraction = extract(BUS_LIBRARY, BUS_CONVERSATION, MockDelayBackend(0.05))
    assert 0.05 <= extraction.latency_s < 0.5


def _junk(rng: random.Random) -> str:
    alphabet = string.ascii_letters + string.digits + " '\":,{}[]`\n-" + "Slot"
    pieces = []
    for _ in range(rng.randint(0, 8)):
        if rng.random() < 0.4:
            pieces.append(f"'Slot-{rng.choice([5, 182, 53, 57, 24, 9])}': '{''.join(rng.choices(alphabet, k=rng.randint(0, 12)))}'")
        else:
            pieces.append("".join(rng.choices(alphabet, k=rng.randint(0, 20))))
    return rng.choice(["\n", ",\n", " "]).join(pieces)


def _junk_bytes(rng: random.Random) -> bytes:
    """Junk text with arbitrary bytes spliced in, often invalid UTF-8."""
    data = bytearray(_junk(rng).encode("utf-8"))
    for _ in range(rng.randint(0, 4)):
        at = rng.randint(0, len(data))
        data[at:at] = rng.randbytes(rng.randint(1, 6))
    return bytes(data)


def _fuzz(n: int, seed: int) -> None:
    rng = random.Random(seed)
    for i in range(n):
        generation = _junk_bytes(rng) if i % 2 else _junk(rng)
        raw = parse_generation(generation, BUS_LIBRARY)
        outcome = validate_and_normalize(raw, BUS_LIBRARY, BUS_CONVERSATION)
        assert validate_state(outcome.state, BUS_LIBRARY) == []


def test_fuzzed_generations_never_break_invariants():
    _fuzz(1_000, 1)


@pytest.mark.slow
def test_fuzzed_generations_100k():
    _fuzz(100_000, 2)
