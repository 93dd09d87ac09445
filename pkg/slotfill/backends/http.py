"""Generic JSON-over-HTTP completion backend.

Request bodies are built from a template with `{{prompt}}`, `{{max_new_tokens}}`,
`{{temperature}}`, `{{stop}}` and `{{model}}` placeholders; the generated text
is read from the response by a dotted field path such as `choices.0.text`.
"""

from __future__ import annotations

import logging
import os
import re
import time
from typing import Any, Callable, Dict, Mapping
from urllib.parse import urlsplit, urlunsplit

import httpx

from slotfill.backends.base import Completion, CompletionRequest, truncate_at_stop
from slotfill.config import BackendConfig, register_secret
from slotfill.errors import AuthMissing, BackendError, BackendTimeout, HttpStatusError, MalformedResponse

logger = logging.getLogger(__name__)

_PLACEHOLDER_RE = re.compile(r"\{\{\s*(\w+)\s*\}\}")
_BODY_EXCERPT = 200


def render_template(template: Any, values: Mapping[str, Any]) -> Any:
    if isinstance(template, dict):
        return {k: render_template(v, values) for k, v in template.items()}
    if isinstance(template, list):
        return [render_template(v, values) for v in template]
    if isinstance(template, str):
        whole = _PLACEHOLDER_RE.fullmatch(template.strip())
        if whole and whole.group(1) in values:
            return values[whole.group(1)]
        return _PLACEHOLDER_RE.sub(lambda m: str(values.get(m.group(1), m.group(0))), template)
    return template


def resolve_path(data: Any, path: str) -> Any:
    current = data
    for part in path.split("."):
        if isinstance(current, list):
            try:
                current = current[int(part)]
            except (ValueError, IndexError):
                raise MalformedResponse(path) from None
        elif isinstance(current, dict) and part in current:
            current = current[part]
        else:
            raise MalformedResponse(path)
    return current


class HttpBackend:
    is_local = False

    def __init__(
        self,
        config: BackendConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport, headers=dict(config.headers))

    def _auth_headers(self) -> Dict[str, str]:
        env_var = self.config.api_key_env
        if not env_var:
            return {}
        key = os.environ.get(env_var)
        if not key:
            raise AuthMissing(env_var)
        register_secret(key)
        return {self.config.auth_header: f"{self.config.auth_scheme} {key}".strip()}

    def build_payload(self, req: CompletionRequest) -> Any:
        values = {
            "prompt": req.prompt,
            "max_new_tokens": req.max_new_tokens,
            "temperature": req.temperature,
            "stop": list(req.stop_sequences),
            "model": self.config.model or "",
        }
        return render_template(self.config.request_template, values)

    def _extract_text(self, response: httpx.Response) -> str:
        path = self.config.response_path or "text"
        try:
            data = response.json()
        except ValueError:
            raise MalformedResponse(path) from None
        value = resolve_path(data, path)
        if not isinstance(value, str):
            raise MalformedResponse(path)
        return value

    def complete(self, req: CompletionRequest) -> Completion:
        endpoint = self.config.endpoint
        payload = self.build_payload(req)
        headers = self._auth_headers()
        retryable = req.temperature == 0 or self.config.retry_nonzero_temperature
        attempts = 1 + (self.config.retries if retryable else 0)

        error: BackendError = BackendError(f"no attempt made against {endpoint}")
        for attempt in range(attempts):
            t0 = time.perf_counter()
            try:
                response = self._client.post(endpoint, json=payload, headers=headers)
            except httpx.TimeoutException:
                error = BackendTimeout(f"no answer from {endpoint} within {self.config.timeout_s}s")
            except httpx.TransportError as e:
                error = BackendError(f"cannot reach {endpoint}: {type(e).__name__}")
            else:
                latency = time.perf_counter() - t0
                code = response.status_code
                if code < 400:
                    text = truncate_at_stop(self._extract_text(response), req.stop_sequences)
                    return Completion(text, latency)
                error = HttpStatusError(code, response.text[:_BODY_EXCERPT])
                if code < 500 and code != 429:
                    raise error
            if attempt + 1 < attempts:
                delay = self.config.backoff_s * self.config.backoff_factor**attempt
                logger.warning("%s (attempt %d/%d), retrying in %.2fs", error, attempt + 1, attempts, delay)
                self._sleep(delay)
        raise error

    def ping(self) -> bool:
        parts = urlsplit(self.config.endpoint or "")
        root = urlunsplit((parts.scheme, parts.netloc, "/", "", ""))
        try:
            self._client.get(root, timeout=min(self.config.timeout_s, 5.0))
        except httpx.HTTPError as e:
            logger.info("backend %s unreachable: %s", root, type(e).__name__)
            return False
        return True

    def close(self) -> None:
        self._client.close()
