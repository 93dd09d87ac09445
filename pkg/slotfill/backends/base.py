from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, Tuple, runtime_checkable

from slotfill.errors import ConfigError


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_new_tokens: int = 270
    stop_sequences: Tuple[str, ...] = field(default_factory=tuple)
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if int(self.max_new_tokens) < 1:
            raise ConfigError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))


@dataclass(frozen=True)
class Completion:
    text: str
    latency_s: float


@runtime_checkable
class CompletionBackend(Protocol):
    is_local: bool

    def complete(self, req: CompletionRequest) -> Completion: ...

    def ping(self) -> bool: ...


def truncate_at_stop(text: str, stops: Sequence[str]) -> str:
    cut = len(text)
    for stop in stops:
        if not stop:
            continue
        idx = text.find(stop)
        if 0 <= idx < cut:
            cut = idx
    return text[:cut]
