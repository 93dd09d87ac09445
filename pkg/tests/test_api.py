from __future__ import annotations

import logging

import httpx
import pytest
from fastapi.testclient import TestClient

from slotfill.backends.base import Completion, CompletionRequest
from slotfill.backends.http import HttpBackend
from slotfill.backends.local import OracleBackend
from slotfill.config import AppSettings, BackendConfig, settings_from_dict
from slotfill.errors import BackendError, ConfigError, HttpStatusError
from slotfill.main import create_app


class DownBackend:
    is_local = True

    def complete(self, req: CompletionRequest) -> Completion:
        raise BackendError("cannot reach http://model.test")

    def ping(self) -> bool:
        return False


class RejectingBackend(DownBackend):
    def complete(self, req: CompletionRequest) -> Completion:
        raise HttpStatusError(500, "Traceback: db password hunter2")


def _payload(figure):
    return {"library": figure.library.to_json(), "conversation": figure.conversation.to_json()}


@pytest.fixture
def client(money, support, registration):
    backend = OracleBackend([money.record(), support.record(), registration.record()])
    return TestClient(create_app(AppSettings(), backend))


def test_root_and_health(client):
    assert client.get("/").json() == {"status": "ok", "service": "slotfill"}
    assert client.get("/healthz").json() == {"ok": True, "backend": "local"}


def test_extract_returns_figure_values(client, money):
    response = client.post("/v1/extract", json=_payload(money))
    assert response.status_code == 200
    body = response.json()
    assert body["ok"] is True
    assert body["values"] == money.gold
    assert body["warnings"] == []
    assert body["dropped_turns"] == 0


def test_extract_is_stateless(client, support):
    first = client.post("/v1/extract", json=_payload(support)).json()
    second = client.post("/v1/extract", json=_payload(support)).json()
    assert (first["values"], first["warnings"]) == (second["values"], second["warnings"])


def test_extract_lowercase_roles_and_plain_descriptions(client):
    body = {
        "library": [{"id": "Slot-1", "description": "first name"}],
        "conversation": [{"role": "user", "text": "I'm Tyler"}],
    }
    response = client.post("/v1/extract", json=body)
    assert response.status_code == 200
    assert response.json()["values"] == {}


def test_empty_conversation_is_a_bad_request(client, money):
    body = {"library": money.library.to_json(), "conversation": []}
    response = client.post("/v1/extract", json=body)
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "MalformedBody"
    assert response.json()["detail"]["field"].startswith("body.conversation")


def test_bad_slot_library_is_unprocessable(client):
    body = {"library": [{"id": "slot one", "description": "x"}], "conversation": [{"role": "USER", "text": "hi"}]}
    response = client.post("/v1/extract", json=body)
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == "InvalidSlotSpec"


def test_unknown_role_is_a_bad_request(client, money):
    body = {"library": money.library.to_json(), "conversation": [{"role": "BOT", "text": "hi"}]}
    response = client.post("/v1/extract", json=body)
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "InvalidTurn"


def test_budget_impossible_is_unprocessable(money):
    settings = settings_from_dict({"tracker": {"max_prompt_tokens": 10}})
    client = TestClient(create_app(settings, OracleBackend([money.record()])))
    response = client.post("/v1/extract", json=_payload(money))
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == "BudgetImpossible"


def test_session_lifecycle(client, money):
    created = client.post("/v1/sessions", json={"library": money.library.to_json(), "mode": "merge"}).json()
    assert created["ok"] is True and created["mode"] == "MERGE"
    session_id = created["session_id"]

    pending = None
    last = None
    for turn in money.conversation:
        if turn.role.value == "SYSTEM":
            pending = turn.text
            continue
        last = client.post(f"/v1/sessions/{session_id}/turns", json={"user_text": turn.text, "system_text": pending})
        assert last.status_code == 200
        pending = None
    body = last.json()
    assert body["state"] == money.gold
    assert body["turns"] == len(money.conversation)
    assert body["delta"] == {k: {"old": None, "new": v} for k, v in money.gold.items()}

    state = client.get(f"/v1/sessions/{session_id}/state").json()
    assert state["state"] == money.gold

    assert client.delete(f"/v1/sessions/{session_id}").json() == {"ok": True, "session_id": session_id}
    missing = client.get(f"/v1/sessions/{session_id}/state")
    assert missing.status_code == 404
    assert missing.json()["detail"]["error"] == "SessionNotFound"


def test_unknown_session_turn_is_not_found(client):
    response = client.post("/v1/sessions/abc/turns", json={"user_text": "hi"})
    assert response.status_code == 404


def test_bad_mode_is_a_bad_request(client, money):
    response = client.post("/v1/sessions", json={"library": money.library.to_json(), "mode": "sideways"})
    assert response.status_code == 400


def test_backend_failure_is_bad_gateway(money):
    client = TestClient(create_app(AppSettings(), DownBackend()))
    session_id = client.post("/v1/sessions", json={"library": money.library.to_json()}).json()["session_id"]
    response = client.post(f"/v1/sessions/{session_id}/turns", json={"user_text": "Savings account"})
    assert response.status_code == 502
    assert response.json()["detail"]["exit_code"] == 3
    state = client.get(f"/v1/sessions/{session_id}/state").json()
    assert state["state"] == {} and state["turns"] == 0
    assert client.post("/v1/extract", json=_payload(money)).status_code == 502


def test_upstream_error_body_is_logged_not_returned(money, caplog):
    client = TestClient(create_app(AppSettings(), RejectingBackend()))
    with caplog.at_level(logging.WARNING, logger="slotfill.api.routes.common"):
        response = client.post("/v1/extract", json=_payload(money))
    assert response.status_code == 502
    assert response.json()["detail"] == {"error": "HttpStatusError", "message": "backend answered HTTP 500", "exit_code": 3}
    assert "hunter2" not in response.text
    assert "hunter2" in caplog.text


def test_metrics_follow_traffic(client, money):
    client.post("/v1/extract", json=_payload(money))
    session_id = client.post("/v1/sessions", json={"library": money.library.to_json()}).json()["session_id"]
    client.post(f"/v1/sessions/{session_id}/turns", json={"user_text": "Savings account"})
    metrics = client.get("/v1/metrics").json()["metrics"]
    assert metrics["total_extractions"] == 2
    assert metrics["total_turns"] == 1
    assert metrics["active_sessions"] == 1
    assert len(metrics["recent_backend_times"]) == 2
    assert client.post("/v1/metrics/reset").json() == {"ok": True}
    assert client.get("/v1/metrics").json()["metrics"]["total_extractions"] == 0


def test_unreachable_http_backend_fails_health():
    def refuse(request):
        raise httpx.ConnectError("refused")

    config = BackendConfig(kind="http", endpoint="http://model.test/v1/completions")
    backend = HttpBackend(config, transport=httpx.MockTransport(refuse))
    client = TestClient(create_app(AppSettings(), backend))
    response = client.get("/healthz")
    assert response.status_code == 503
    assert response.json() == {"ok": False, "backend": "unreachable"}


def test_app_needs_a_backend():
    with pytest.raises(ConfigError):
        create_app(AppSettings())
