"""Per-session dialogue-state tracking.

Each turn re-extracts over the full (truncated) history and folds the result
into the session state under its update mode. Sessions live in memory or, with
a store directory, as one JSON file each.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, Mapping, Protocol, Tuple

import numpy as np

from slotfill.backends.base import CompletionBackend
from slotfill.config import TrackerSettings
from slotfill.errors import BackendError, SessionNotFound
from slotfill.nlp.core import BeliefState, Conversation, Role, SlotLibrary, Turn, UpdateMode, belief_update
from slotfill.nlp.outparse import Extraction, extract

logger = logging.getLogger(__name__)

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Session:
    id: str
    library: SlotLibrary
    conversation: Conversation = field(default_factory=Conversation)
    state: BeliefState = field(default_factory=BeliefState)
    mode: UpdateMode = UpdateMode.REPLACE
    created: str = field(default_factory=_now)
    updated: str = field(default_factory=_now)

    @classmethod
    def new(cls, library: SlotLibrary, mode: UpdateMode | str = UpdateMode.REPLACE) -> "Session":
        return cls(uuid.uuid4().hex, library, state=BeliefState.of({}, library), mode=UpdateMode.parse(mode))

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "library": self.library.to_json(),
            "conversation": self.conversation.to_json(),
            "state": self.state.as_dict(),
            "mode": self.mode.value,
            "created": self.created,
            "updated": self.updated,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Session":
        library = SlotLibrary.from_json(obj["library"])
        return cls(
            id=obj["id"],
            library=library,
            conversation=Conversation.from_json(obj.get("conversation", [])),
            state=BeliefState.of(obj.get("state", {}), library),
            mode=UpdateMode.parse(obj.get("mode", "replace")),
            created=obj.get("created", ""),
            updated=obj.get("updated", ""),
        )


def state_delta(before: BeliefState, after: BeliefState) -> Dict[str, Tuple[str | None, str | None]]:
    """Slots whose value changed, as id -> (old, new); None means absent."""
    delta = {}
    for slot_id in sorted(set(before.values) | set(after.values)):
        old, new = before.get(slot_id), after.get(slot_id)
        if old != new:
            delta[slot_id] = (old, new)
    return delta


def track_turn(
    session: Session,
    user_text: str,
    backend: CompletionBackend,
    settings: TrackerSettings | None = None,
    system_text: str | None = None,
) -> Tuple[Session, Extraction]:
    """Append the turn(s), re-extract over the history and apply the update mode.

    Pure: the input session is never modified, so a backend error leaves the
    caller's copy as it was.
    """
    settings = settings or TrackerSettings()
    turns = []
    if system_text is not None and system_text.strip():
        turns.append(Turn(Role.SYSTEM, system_text))
    turns.append(Turn(Role.USER, user_text))
    conversation = session.conversation.append(*turns)
    extraction = extract(
        session.library,
        conversation,
        backend,
        settings.budget,
        settings.token_counter,
        fuzzy_threshold=settings.fuzzy_threshold,
        repair_substring=settings.repair_substring,
    )
    state = belief_update(session.state, extraction.state, session.mode)
    return replace(session, conversation=conversation, state=state, updated=_now()), extraction


# ------------------------- Stores -------------------------
class SessionStore(Protocol):
    def get(self, session_id: str) -> Session: ...

    def put(self, session: Session) -> None: ...

    def delete(self, session_id: str) -> None: ...

    def __len__(self) -> int: ...


class MemorySessionStore:
    def __init__(self) -> None:
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise SessionNotFound(session_id)
        return session

    def put(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def delete(self, session_id: str) -> None:
        with self._lock:
            if self._sessions.pop(session_id, None) is None:
                raise SessionNotFound(session_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


class FileSessionStore:
    """One `<id>.json` per session; writes go through a temp file and os.replace."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not _SESSION_ID_RE.match(session_id):
            raise SessionNotFound(session_id)
        return self.directory / f"{session_id}.json"

    def get(self, session_id: str) -> Session:
        path = self._path(session_id)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise SessionNotFound(session_id) from None
        return Session.from_json(data)

    def put(self, session: Session) -> None:
        path = self._path(session.id)
        tmp = path.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
        tmp.write_text(json.dumps(session.to_json(), ensure_ascii=False, indent=2), encoding="utf-8")
        os.replace(tmp, path)

    def delete(self, session_id: str) -> None:
        try:
            self._path(session_id).unlink()
        except FileNotFoundError:
            raise SessionNotFound(session_id) from None

    def __len__(self) -> int:
        return sum(1 for _ in self.directory.glob("*.json"))


def open_store(path: str | Path | None) -> SessionStore:
    if path is None:
        return MemorySessionStore()
    logger.info("session store at %s", path)
    return FileSessionStore(path)


# ------------------------- Metrics -------------------------
_metrics: Dict[str, Any] = {
    "total_turns": 0,
    "total_extractions": 0,
    "backend_errors": 0,
    "backend_times": [],  # seconds list (trimmed)
    "active_turns": 0,
}
_metrics_lock = threading.Lock()


def _record_time(elapsed: float) -> None:
    with _metrics_lock:
        _metrics["backend_times"].append(elapsed)
        if len(_metrics["backend_times"]) > 500:
            del _metrics["backend_times"][:-500]


def _inc(name: str, delta: int = 1) -> None:
    with _metrics_lock:
        _metrics[name] = _metrics.get(name, 0) + delta


def record_extraction(extraction: Extraction) -> None:
    _inc("total_extractions")
    _record_time(extraction.latency_s)


def record_backend_error() -> None:
    _inc("backend_errors")


def get_metrics(active_sessions: int = 0) -> Dict[str, Any]:
    with _metrics_lock:
        times = list(_metrics["backend_times"])
        counts = {k: v for k, v in _metrics.items() if k != "backend_times"}
    avg = float(np.mean(times)) if times else 0.0
    p95 = float(np.percentile(times, 95)) if times else 0.0
    return {
        **counts,
        "active_sessions": active_sessions,
        "avg_backend_sec": avg,
        "p95_backend_sec": p95,
        "recent_backend_times": times[-20:],
    }


def reset_metrics() -> Dict[str, Any]:
    with _metrics_lock:
        _metrics["total_turns"] = 0
        _metrics["total_extractions"] = 0
        _metrics["backend_errors"] = 0
        _metrics["backend_times"] = []
        _metrics["active_turns"] = 0
    return {"ok": True}


# ------------------------- Tracker -------------------------
@dataclass(frozen=True)
class TurnOutcome:
    session: Session
    previous: Session
    extraction: Extraction

    @property
    def delta(self) -> Dict[str, Tuple[str | None, str | None]]:
        return state_delta(self.previous.state, self.session.state)


class SessionTracker:
    """Sessions over a store; turns on one session run one at a time."""

    def __init__(
        self,
        backend: CompletionBackend,
        settings: TrackerSettings | None = None,
        store: SessionStore | None = None,
    ):
        self.backend = backend
        self.settings = settings or TrackerSettings()
        self.store = store if store is not None else MemorySessionStore()
        self._locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    @contextmanager
    def _session_lock(self, session_id: str) -> Iterator[None]:
        """Hold the session's lock; unknown ids leave no lock behind."""
        self.store.get(session_id)
        with self._locks_guard:
            lock = self._locks.setdefault(session_id, threading.Lock())
        try:
            with lock:
                yield
        except SessionNotFound:
            with self._locks_guard:
                self._locks.pop(session_id, None)
            raise

    def create(self, library: SlotLibrary, mode: UpdateMode | str | None = None) -> Session:
        session = Session.new(library, mode if mode is not None else self.settings.mode)
        self.store.put(session)
        logger.info("created session %s with %d slots (%s)", session.id, len(library), session.mode.value)
        return session

    def get(self, session_id: str) -> Session:
        return self.store.get(session_id)

    def delete(self, session_id: str) -> None:
        with self._session_lock(session_id):
            self.store.delete(session_id)
        with self._locks_guard:
            self._locks.pop(session_id, None)
        logger.info("deleted session %s", session_id)

    def reset(self, session_id: str) -> Session:
        with self._session_lock(session_id):
            session = self.store.get(session_id)
            fresh = replace(session, conversation=Conversation(), state=BeliefState.of({}, session.library), updated=_now())
            self.store.put(fresh)
        return fresh

    def track(self, session_id: str, user_text: str, system_text: str | None = None) -> TurnOutcome:
        _inc("total_turns")
        _inc("active_turns", 1)
        try:
            with self._session_lock(session_id):
                session = self.store.get(session_id)
                try:
                    updated, extraction = track_turn(session, user_text, self.backend, self.settings, system_text)
                except BackendError:
                    record_backend_error()
                    logger.warning("backend failed on session %s; state unchanged", session_id)
                    raise
                record_extraction(extraction)
                self.store.put(updated)
        finally:
            _inc("active_turns", -1)
        return TurnOutcome(updated, session, extraction)

    def metrics(self) -> Dict[str, Any]:
        return get_metrics(active_sessions=len(self.store))
