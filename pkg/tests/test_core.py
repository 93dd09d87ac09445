from __future__ import annotations

import random

import pytest

from slotfill.errors import InvalidSlotSpec, InvalidTurn, MixedLibrary
from slotfill.nlp.core import (
    BeliefState,
    Conversation,
    Role,
    SlotLibrary,
    SlotSpec,
    Turn,
    UpdateMode,
    ViolationRule,
    belief_update,
    validate_state,
)

SALON = SlotLibrary(
    (
        SlotSpec("Slot-51", "Name of the salon"),
        SlotSpec("Slot-0", "Time of the appointment"),
        SlotSpec("Slot-154", "Date of the appointment"),
        SlotSpec("Slot-63", "Please confirm", allowed_values=("Yes, go ahead", "No")),
    )
)


def test_slot_spec_rejects_bad_ids_and_descriptions():
    with pytest.raises(InvalidSlotSpec):
        SlotSpec("slot-1", "first name")
    with pytest.raises(InvalidSlotSpec):
        SlotSpec("Slot-1", "   ")
    with pytest.raises(InvalidSlotSpec):
        SlotSpec("Slot-1", "first\nname")


def test_categorical_needs_two_distinct_values():
    with pytest.raises(InvalidSlotSpec):
        SlotSpec("Slot-1", "confirm", allowed_values=("Yes", "Yes"))
    assert SlotSpec("Slot-1", "confirm", allowed_values=["Yes", "No"]).allowed_values == ("Yes", "No")


def test_library_rejects_duplicate_ids():
    with pytest.raises(InvalidSlotSpec):
        SlotLibrary((SlotSpec("Slot-1", "a"), SlotSpec("Slot-1", "b")))


def test_library_json_round_trip_keeps_fingerprint():
    again = SlotLibrary.from_json(SALON.to_json())
    assert again == SALON
    assert again.fingerprint == SALON.fingerprint
    assert SALON.replace_slot("Slot-0", [SlotSpec("Slot-1", "hour")]).fingerprint != SALON.fingerprint


def test_turn_role_is_case_insensitive_and_text_required():
    assert Turn("user", "hi").role is Role.USER
    with pytest.raises(InvalidTurn):
        Turn("BOT", "hi")
    with pytest.raises(InvalidTurn):
        Turn(Role.USER, "  ")


def test_conversation_grounds_values_within_one_utterance():
    conv = Conversation((Turn(Role.USER, "I need a salon appointment."), Turn(Role.SYSTEM, "Which salon?")))
    assert conv.grounds("salon appointment")
    assert not conv.grounds("appointment.\nWhich")
    assert not conv.grounds("")
    assert [t.text for t in conv.user_turns()] == ["I need a salon appointment."]
    assert Conversation.from_json(conv.to_json()) == conv


def test_belief_update_from_empty_prior():
    prev = BeliefState({})
    assert belief_update(prev, BeliefState({"Slot-5": "long beach"})) == {"Slot-5": "long beach"}


def test_replace_trusts_the_new_extraction():
    out = belief_update(BeliefState({"Slot-1": "a"}), BeliefState({"Slot-2": "b"}), UpdateMode.REPLACE)
    assert out == {"Slot-2": "b"}


def test_merge_overwrites_and_keeps_old_keys():
    out = belief_update(BeliefState({"Slot-1": "a", "Slot-2": "x"}), BeliefState({"Slot-1": "c"}), "merge")
    assert out == {"Slot-1": "c", "Slot-2": "x"}


def test_replace_is_idempotent():
    s = BeliefState({"Slot-1": "a", "Slot-9": "z"})
    assert belief_update(s, s, UpdateMode.REPLACE) == s


def test_merge_is_associative():
    rng = random.Random(11)
    for _ in range(200):
        a, b, c = (BeliefState({f"Slot-{rng.randint(0, 5)}": rng.choice("xyz") for _ in range(3)}) for _ in range(3))
        left = belief_update(belief_update(a, b, "merge"), c, "merge")
        right = belief_update(a, belief_update(b, c, "merge"), "merge")
        assert left == right


def test_states_from_different_libraries_do_not_mix():
    other = SlotLibrary((SlotSpec("Slot-51", "Name of the salon"),))
    with pytest.raises(MixedLibrary):
        belief_update(BeliefState.of({}, SALON), BeliefState.of({}, other))


def test_validate_state_accepts_valid_state():
    state = BeliefState({"Slot-51": "Salon Revel", "Slot-0": "evening 6:45", "Slot-154": "the 1st", "Slot-63": "Yes, go ahead"})
    assert validate_state(state, SALON) == []


def test_validate_state_flags_value_outside_allowed_set():
    violations = validate_state(BeliefState({"Slot-63": "maybe"}), SALON)
    assert [(v.slot_id, v.rule) for v in violations] == [("Slot-63", ViolationRule.NOT_IN_ALLOWED_VALUES)]


def test_validate_state_flags_unknown_and_empty():
    violations = validate_state(BeliefState({"Slot-999": "x", "Slot-51": ""}), SALON)
    assert {v.rule for v in violations} == {ViolationRule.UNKNOWN_SLOT, ViolationRule.EMPTY_VALUE}
