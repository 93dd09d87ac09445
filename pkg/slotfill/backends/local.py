"""Deterministic in-process backends used for tests, acceptance runs and demos."""

from __future__ import annotations

import logging
import random
import threading
import time
from typing import Dict, Iterable

from slotfill.backends.base import Completion, CompletionBackend, CompletionRequest, truncate_at_stop
from slotfill.errors import BudgetImpossible
from slotfill.nlp.core import PromptRecord
from slotfill.nlp.outparse import parse_generation
from slotfill.nlp.promptgen import DEFAULT_BUDGET, WHITESPACE, TokenBudget, TokenCounter, format_pairs, render_prompt

logger = logging.getLogger(__name__)


class OracleBackend:
    """Answers each known prompt with its record's gold output.

    Prompts are indexed as stored and as re-rendered under the run's budget.
    """

    is_local = True

    def __init__(
        self,
        records: Iterable[PromptRecord] = (),
        budget: TokenBudget = DEFAULT_BUDGET,
        counter: TokenCounter = WHITESPACE,
    ):
        self.budget = budget
        self.counter = counter
        self._answers: Dict[str, str] = {}
        self._lock = threading.Lock()
        for record in records:
            self.add(record)

    def add(self, record: PromptRecord) -> None:
        with self._lock:
            self._answers[record.prompt] = record.gold_output
            try:
                rendered = render_prompt(record.library, record.conversation, self.budget, self.counter)
            except BudgetImpossible:
                return
            self._answers.setdefault(rendered.text, record.gold_output)

    def __len__(self) -> int:
        return len(self._answers)

    def complete(self, req: CompletionRequest) -> Completion:
        t0 = time.perf_counter()
        text = self._answers.get(req.prompt)
        if text is None:
            logger.debug("oracle has no answer for a prompt of %d chars", len(req.prompt))
            text = ""
        return Completion(truncate_at_stop(text, req.stop_sequences), time.perf_counter() - t0)

    def ping(self) -> bool:
        return True


class CorruptBackend:
    """Wraps another backend and drops `drop_k` of its slot/value pairs.

    The dropped pairs are chosen by an RNG seeded from (seed, prompt).
    """

    is_local = True

    def __init__(self, inner: CompletionBackend, drop_k: int = 0, seed: int = 0):
        if drop_k < 0:
            raise ValueError("drop_k must be >= 0")
        self.inner = inner
        self.drop_k = drop_k
        self.seed = seed

    def complete(self, req: CompletionRequest) -> Completion:
        completion = self.inner.complete(req)
        if self.drop_k == 0:
            return completion
        pairs = list(parse_generation(completion.text).values.items())
        rng = random.Random(f"{self.seed}:{req.prompt}")
        dropped = set(rng.sample(range(len(pairs)), min(self.drop_k, len(pairs))))
        kept = [pair for i, pair in enumerate(pairs) if i not in dropped]
        return Completion(format_pairs(kept), completion.latency_s)

    def ping(self) -> bool:
        return self.inner.ping()


def corrupt_complete(inner: CompletionBackend, req: CompletionRequest, drop_k: int, seed: int = 0) -> str:
    return CorruptBackend(inner, drop_k, seed).complete(req).text


class MockDelayBackend:
    """Sleeps a fixed delay before answering (empty text, or the inner backend's)."""

    is_local = True

    def __init__(self, delay_s: float, inner: CompletionBackend | None = None):
        self.delay_s = max(0.0, delay_s)
        self.inner = inner

    def complete(self, req: CompletionRequest) -> Completion:
        t0 = time.perf_counter()
        time.sleep(self.delay_s)
        text = self.inner.complete(req).text if self.inner is not None else ""
        return Completion(text, time.perf_counter() - t0)

    def ping(self) -> bool:
        return True
