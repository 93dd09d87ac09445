"""Interactive terminal tracker.

Reads user lines, prints the belief-state delta after each turn.

Commands:
    /system <text>   queue a system turn before the next user line
    /state           print the full state
    /reset           start the conversation over
    /quit            leave
"""

from __future__ import annotations

import logging
import sys
from typing import Dict, TextIO, Tuple

from slotfill.api.services.tracker import SessionTracker
from slotfill.backends.base import CompletionBackend
from slotfill.config import TrackerSettings
from slotfill.errors import BackendError, DataError
from slotfill.nlp.core import BeliefState, SlotLibrary, UpdateMode

logger = logging.getLogger(__name__)

PROMPT = "user> "


def format_delta(delta: Dict[str, Tuple[str | None, str | None]]) -> str:
    lines = []
    for slot_id, (old, new) in delta.items():
        if old is None:
            lines.append(f"+ {slot_id} = {new!r}")
        elif new is None:
            lines.append(f"- {slot_id} (was {old!r})")
        else:
            lines.append(f"~ {slot_id}: {old!r} -> {new!r}")
    return "\n".join(lines) if lines else "(no change)"


def format_state(state: BeliefState, library: SlotLibrary) -> str:
    if not len(state):
        return "(empty)"
    return "\n".join(f"{spec.id} = {state.values[spec.id]!r}" for spec in library if spec.id in state)


def run_repl(
    library: SlotLibrary,
    backend: CompletionBackend,
    settings: TrackerSettings | None = None,
    mode: UpdateMode | str | None = None,
    stdin: TextIO = sys.stdin,
    stdout: TextIO = sys.stdout,
) -> int:
    tracker = SessionTracker(backend, settings)
    session = tracker.create(library, mode)
    pending_system: str | None = None

    def say(text: str) -> None:
        stdout.write(text + "\n")
        stdout.flush()

    say(f"{len(library)} slots loaded, mode {session.mode.value.lower()}. /quit to leave.")
    while True:
        stdout.write(PROMPT)
        stdout.flush()
        line = stdin.readline()
        if not line:
            break
        line = line.rstrip("\n")
        if not line.strip():
            continue

        command, _, rest = line.strip().partition(" ")
        if command == "/quit":
            break
        if command == "/state":
            say(format_state(tracker.get(session.id).state, library))
            continue
        if command == "/reset":
            tracker.reset(session.id)
            pending_system = None
            say("(reset)")
            continue
        if command == "/system":
            if not rest.strip():
                say("usage: /system <text>")
                continue
            pending_system = rest.strip()
            continue
        if command.startswith("/"):
            say(f"unknown command {command}")
            continue

        try:
            outcome = tracker.track(session.id, line, pending_system)
        except BackendError as e:
            say(f"backend error: {e} (state unchanged)")
            continue
        except DataError as e:
            say(f"error: {e}")
            continue
        pending_system = None
        say(format_delta(outcome.delta))
        for w in outcome.extraction.warnings:
            say(f"! {w.reason.value} {w.target}")
    return 0
