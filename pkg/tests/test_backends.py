from __future__ import annotations

import json
import logging

import httpx
import pytest

from slotfill.backends.base import CompletionBackend, CompletionRequest, truncate_at_stop
from slotfill.backends.factory import build_backend
from slotfill.backends.http import HttpBackend, render_template, resolve_path
from slotfill.backends.local import CorruptBackend, MockDelayBackend, OracleBackend
from slotfill.config import BackendConfig, REDACTED
from slotfill.errors import AuthMissing, BackendError, ConfigError, HttpStatusError, MalformedResponse
from slotfill.nlp.outparse import parse_generation
from slotfill.nlp.promptgen import TokenBudget, render_prompt

ENDPOINT = "http://model.test/v1/completions"


def _config(**kwargs) -> BackendConfig:
    base = {"kind": "http", "preset": "openai-completions", "endpoint": ENDPOINT, "model": "m", "backoff_s": 0.0}
    return BackendConfig(**(base | kwargs))


class Recorder:
    """MockTransport handler answering from a queue of (status, body)."""

    def __init__(self, *answers):
        self.answers = list(answers)
        self.requests = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        status, body = self.answers.pop(0) if len(self.answers) > 1 else self.answers[0]
        if isinstance(body, Exception):
            raise body
        return httpx.Response(status, json=body) if not isinstance(body, str) else httpx.Response(status, text=body)


def _ok(text):
    return 200, {"choices": [{"text": text}]}


def _backend(recorder, sleeps=None, **kwargs):
    sleeps = [] if sleeps is None else sleeps
    return HttpBackend(_config(**kwargs), transport=httpx.MockTransport(recorder), sleep=sleeps.append)


def test_preset_request_body_and_response_path():
    recorder = Recorder(_ok("'Slot-1': 'Jim'"))
    completion = _backend(recorder).complete(CompletionRequest("PROMPT", max_new_tokens=50, stop_sequences=("\n\n",)))
    assert completion.text == "'Slot-1': 'Jim'"
    body = json.loads(recorder.requests[0].content)
    assert body == {"model": "m", "prompt": "PROMPT", "max_tokens": 50, "temperature": 0.0, "stop": ["\n\n"]}


def test_chat_and_tgi_presets():
    chat = Recorder((200, {"choices": [{"message": {"content": "ok"}}]}))
    assert _backend(chat, preset="openai-chat").complete(CompletionRequest("p")).text == "ok"
    assert json.loads(chat.requests[0].content)["messages"] == [{"role": "user", "content": "p"}]
    tgi = Recorder((200, {"generated_text": "fine"}))
    assert _backend(tgi, preset="tgi").complete(CompletionRequest("p")).text == "fine"


def test_stop_sequence_truncates_text():
    recorder = Recorder(_ok("'Slot-1': 'Jim'\n\nextra chatter"))
    assert _backend(recorder).complete(CompletionRequest("p", stop_sequences=("\n\n",))).text == "'Slot-1': 'Jim'"


def test_server_errors_are_retried_with_backoff():
    sleeps = []
    recorder = Recorder((503, "busy"), (502, "busy"), _ok("done"))
    backend = _backend(recorder, sleeps, backoff_s=0.5, backoff_factor=2.0, retries=2)
    assert backend.complete(CompletionRequest("p")).text == "done"
    assert len(recorder.requests) == 3
    assert sleeps == [0.5, 1.0]


def test_retries_run_out():
    recorder = Recorder((500, "down"))
    with pytest.raises(HttpStatusError) as info:
        _backend(recorder, retries=2).complete(CompletionRequest("p"))
    assert info.value.code == 500
    assert len(recorder.requests) == 3


def test_no_retry_when_sampling():
    recorder = Recorder((503, "busy"), _ok("late"))
    with pytest.raises(HttpStatusError):
        _backend(recorder).complete(CompletionRequest("p", temperature=0.7))
    assert len(recorder.requests) == 1


def test_client_errors_are_not_retried():
    recorder = Recorder((400, "bad request"), _ok("never"))
    with pytest.raises(HttpStatusError) as info:
        _backend(recorder).complete(CompletionRequest("p"))
    assert info.value.code == 400
    assert info.value.exit_code == 3
    assert len(recorder.requests) == 1


def test_connection_failure_is_a_backend_error():
    recorder = Recorder((0, httpx.ConnectError("refused")))
    with pytest.raises(BackendError):
        _backend(recorder, retries=1).complete(CompletionRequest("p"))
    assert len(recorder.requests) == 2


def test_missing_field_is_malformed_response():
    recorder = Recorder((200, {"choices": []}))
    with pytest.raises(MalformedResponse) as info:
        _backend(recorder).complete(CompletionRequest("p"))
    assert info.value.path == "choices.0.text"


def test_non_json_body_is_malformed_response():
    recorder = Recorder((200, "<html>"))
    with pytest.raises(MalformedResponse):
        _backend(recorder).complete(CompletionRequest("p"))


def test_api_key_from_environment(monkeypatch, caplog):
    monkeypatch.setenv("SLOTFILL_TEST_KEY", "sk-test-123456")
    recorder = Recorder(_ok("x"))
    _backend(recorder, api_key_env="SLOTFILL_TEST_KEY").complete(CompletionRequest("p"))
    assert recorder.requests[0].headers["Authorization"] == "Bearer sk-test-123456"

    with caplog.at_level(logging.INFO, logger="slotfill.backends.http"):
        logging.getLogger("slotfill.backends.http").info("sent key %s", "sk-test-123456")
        logging.getLogger("slotfill.backends.http").warning("rejected: sk-test-123456")
    assert "sk-test-123456" not in caplog.text
    messages = [r.getMessage() for r in caplog.records]
    assert f"sent key {REDACTED}" in messages
    assert f"rejected: {REDACTED}" in messages


def test_missing_api_key(monkeypatch):
    monkeypatch.delenv("SLOTFILL_ABSENT_KEY", raising=False)
    recorder = Recorder(_ok("x"))
    with pytest.raises(AuthMissing):
        _backend(recorder, api_key_env="SLOTFILL_ABSENT_KEY").complete(CompletionRequest("p"))
    assert recorder.requests == []


def test_ping():
    assert _backend(Recorder((200, "hi"))).ping() is True
    assert _backend(Recorder((0, httpx.ConnectError("refused")))).ping() is False


def test_template_and_path_helpers():
    rendered = render_template({"a": "{{n}}", "b": "n={{n}}", "c": ["{{s}}"]}, {"n": 3, "s": "x"})
    assert rendered == {"a": 3, "b": "n=3", "c": ["x"]}
    assert resolve_path({"a": [{"b": "z"}]}, "a.0.b") == "z"
    with pytest.raises(MalformedResponse):
        resolve_path({"a": []}, "a.0")
    assert truncate_at_stop("abc</s>def", ["</s>", "c"]) == "ab"


def test_http_config_needs_endpoint():
    with pytest.raises(ValueError):
        BackendConfig(kind="http")
    with pytest.raises(ValueError):
        BackendConfig(kind="http", endpoint=ENDPOINT, preset="nope")


def test_request_validation():
    with pytest.raises(ConfigError):
        CompletionRequest("p", max_new_tokens=0)
    with pytest.raises(ConfigError):
        CompletionRequest("p", temperature=-1)


def test_oracle_answers_known_prompts(money):
    oracle = OracleBackend([money.record()])
    assert oracle.complete(CompletionRequest(money.prompt)).text == money.output
    assert oracle.complete(CompletionRequest("unknown prompt")).text == ""
    assert isinstance(oracle, CompletionBackend)


def test_oracle_indexes_rerendered_prompts(registration):
    budget = TokenBudget(60, 270)
    oracle = OracleBackend([registration.record()], budget=budget)
    truncated = render_prompt(registration.library, registration.conversation, budget).text
    assert oracle.complete(CompletionRequest(truncated)).text == registration.output


def test_corrupt_drops_exactly_k_pairs(registration):
    oracle = OracleBackend([registration.record()])
    corrupt = CorruptBackend(oracle, drop_k=2, seed=1)
    text = corrupt.complete(CompletionRequest(registration.prompt)).text
    values = parse_generation(text).values
    assert len(values) == len(registration.gold) - 2
    assert all(registration.gold[k] == v for k, v in values.items())
    assert corrupt.complete(CompletionRequest(registration.prompt)).text == text


def test_factory_builds_each_kind(money, tmp_path):
    records = [money.record()]
    assert isinstance(build_backend(BackendConfig(kind="oracle"), records), OracleBackend)
    assert isinstance(build_backend(BackendConfig(kind="corrupt", drop_k=1), records), CorruptBackend)
    delay = build_backend(BackendConfig(kind="mock-delay", delay_ms=5))
    assert isinstance(delay, MockDelayBackend) and delay.delay_s == pytest.approx(0.005)
    http = build_backend(_config(), transport=httpx.MockTransport(Recorder(_ok("y"))))
    assert http.complete(CompletionRequest("p")).text == "y"
    with pytest.raises(ConfigError):
        build_backend(BackendConfig(kind="oracle"))
