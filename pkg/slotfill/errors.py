from __future__ import annotations

from typing import Any, Dict


class SlotFillError(Exception):
    """Base of every error raised by slotfill."""

    exit_code = 2

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), "exit_code": self.exit_code}


class UsageError(SlotFillError):
    exit_code = 1


class ConfigError(SlotFillError):
    exit_code = 1


# ------------------------- Data errors -------------------------
class DataError(SlotFillError, ValueError):
    exit_code = 2


class InvalidSlotSpec(DataError):
    pass


class InvalidTurn(DataError):
    pass


class InvalidState(DataError):
    pass


class MixedLibrary(DataError):
    def __init__(self, left: str | None, right: str | None):
        super().__init__(f"states reference different slot libraries ({left} != {right})")
        self.left = left
        self.right = right


class BudgetImpossible(DataError):
    def __init__(self, needed: int, budget: int):
        super().__init__(f"instruction, slot library and latest turn need {needed} tokens; budget is {budget}")
        self.needed = needed
        self.budget = budget


class MalformedClause(DataError):
    pass


class MissingSchema(DataError):
    def __init__(self, directory: str):
        super().__init__(f"no schema.json in {directory}")
        self.directory = directory


class MalformedJson(DataError):
    def __init__(self, file: str, position: str, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"malformed JSON in {file} at {position}{detail}")
        self.file = file
        self.position = position


class UnknownService(DataError):
    def __init__(self, file: str, dialogue_id: str, service: str):
        super().__init__(f"{file}: dialogue {dialogue_id} references service {service!r} absent from schema")
        self.file = file
        self.dialogue_id = dialogue_id
        self.service = service


class IdSpaceExhausted(DataError):
    def __init__(self, requested: int, available: int = 1000):
        super().__init__(f"{requested} distinct slots requested, only {available} ids available")
        self.requested = requested
        self.available = available


class MalformedLine(DataError):
    def __init__(self, path: str, line: int, message: str = ""):
        detail = f": {message}" if message else ""
        super().__init__(f"{path}:{line}: malformed record{detail}")
        self.path = path
        self.line = line


class EmptyBank(DataError):
    def __init__(self, path: str):
        super().__init__(f"value bank {path} has no entries")
        self.path = path


class UnsplittableAddress(DataError):
    def __init__(self, address: str):
        super().__init__(f"no street keyword in address {address!r}")
        self.address = address


class EmptyScoreSet(DataError):
    pass


class SessionNotFound(DataError):
    def __init__(self, session_id: str):
        super().__init__(f"session {session_id} not found")
        self.session_id = session_id


# ------------------------- Backend errors -------------------------
class BackendError(SlotFillError):
    exit_code = 3


class BackendTimeout(BackendError):
    pass


class HttpStatusError(BackendError):
    def __init__(self, code: int, body: str):
        super().__init__(f"backend answered HTTP {code}: {body}")
        self.code = code
        self.body = body


class AuthMissing(BackendError):
    def __init__(self, env_var: str):
        super().__init__(f"environment variable {env_var} holding the API key is not set")
        self.env_var = env_var


class MalformedResponse(BackendError):
    def __init__(self, path: str):
        super().__init__(f"response has no field at path {path!r}")
        self.path = path
