from __future__ import annotations

import logging
from typing import Iterable

import httpx

from slotfill.backends.base import CompletionBackend
from slotfill.backends.http import HttpBackend
from slotfill.backends.local import CorruptBackend, MockDelayBackend, OracleBackend
from slotfill.config import BackendConfig, BackendKind
from slotfill.data.sgd_ingest import read_jsonl
from slotfill.errors import ConfigError
from slotfill.nlp.core import PromptRecord
from slotfill.nlp.promptgen import DEFAULT_BUDGET, WHITESPACE, TokenBudget, TokenCounter

logger = logging.getLogger(__name__)


def _oracle(config: BackendConfig, records: Iterable[PromptRecord] | None, budget: TokenBudget, counter: TokenCounter) -> OracleBackend:
    if records is None:
        if not config.dataset:
            raise ConfigError(f"a {config.kind.value} backend needs `dataset` (a JSONL file of records)")
        records = read_jsonl(config.dataset)
    return OracleBackend(records, budget, counter)


def build_backend(
    config: BackendConfig,
    records: Iterable[PromptRecord] | None = None,
    budget: TokenBudget = DEFAULT_BUDGET,
    counter: TokenCounter = WHITESPACE,
    transport: httpx.BaseTransport | None = None,
) -> CompletionBackend:
    """Instantiate the backend a config describes.

    `records` feeds oracle-based kinds directly, bypassing `config.dataset`.
    """
    kind = config.kind
    if kind is BackendKind.HTTP:
        backend: CompletionBackend = HttpBackend(config, transport=transport)
    elif kind is BackendKind.ORACLE:
        backend = _oracle(config, records, budget, counter)
    elif kind is BackendKind.CORRUPT:
        backend = CorruptBackend(_oracle(config, records, budget, counter), config.drop_k, config.seed)
    elif kind is BackendKind.MOCK_DELAY:
        inner = _oracle(config, records, budget, counter) if (records is not None or config.dataset) else None
        backend = MockDelayBackend(config.delay_ms / 1000.0, inner)
    else:  # pragma: no cover
        raise ConfigError(f"unsupported backend kind {kind}")
    logger.info("using %s backend", kind.value.lower())
    return backend
