from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import pytest

from slotfill.api.services.tracker import reset_metrics
from slotfill.backends.base import Completion, CompletionRequest
from slotfill.data.sample import write_sample_corpus
from slotfill.nlp.core import Conversation, PromptRecord, SlotLibrary
from slotfill.nlp.promptgen import build_record, format_pairs, library_from_json

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass
class Figure:
    library: SlotLibrary
    conversation: Conversation
    gold: Dict[str, str]
    prompt: str
    output: str

    def record(self, **kwargs) -> PromptRecord:
        return build_record(self.library, self.conversation, self.gold, **kwargs)


def load_figure(name: str) -> Figure:
    data = json.loads((FIXTURES / f"{name}.json").read_text(encoding="utf-8"))
    return Figure(
        library=library_from_json(data["library"]),
        conversation=Conversation.from_json(data["conversation"]),
        gold=data["gold"],
        prompt=(FIXTURES / f"{name}.prompt.txt").read_text(encoding="utf-8"),
        output=(FIXTURES / f"{name}.output.txt").read_text(encoding="utf-8"),
    )


@pytest.fixture
def registration() -> Figure:
    return load_figure("registration")


@pytest.fixture
def money() -> Figure:
    return load_figure("money")


@pytest.fixture
def support() -> Figure:
    return load_figure("support")


@pytest.fixture
def figures(registration, money, support):
    return [registration, money, support]


@pytest.fixture(scope="session")
def sample_corpus(tmp_path_factory) -> Path:
    return write_sample_corpus(tmp_path_factory.mktemp("sgd"), n_dialogues=120, seed=3)


class UserEchoBackend:
    """Answers with the gold pairs whose value is a whole user turn of the prompt.

    With `last_only` only the latest user turn counts.
    """

    is_local = True

    def __init__(self, gold: Dict[str, str], last_only: bool = False):
        self.gold = gold
        self.last_only = last_only
        self.prompts: List[str] = []

    def complete(self, req: CompletionRequest) -> Completion:
        self.prompts.append(req.prompt)
        conversation = req.prompt.split("<conversation>\n", 1)[1]
        users = [line[len("[USER] ") :] for line in conversation.splitlines() if line.startswith("[USER] ")]
        if self.last_only:
            users = users[-1:]
        return Completion(format_pairs([(k, v) for k, v in self.gold.items() if v in users]), 0.0)

    def ping(self) -> bool:
        return True


@pytest.fixture
def user_echo():
    return UserEchoBackend


@pytest.fixture(autouse=True)
def _fresh_metrics():
    reset_metrics()
    yield
