"""Settings file loading and logging setup.

One TOML or JSON file with `[backend]`, `[tracker]`, `[server]` and `[logging]`
sections. Secrets are referenced by environment variable name only.
"""

from __future__ import annotations

import copy
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Set

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from slotfill.errors import ConfigError
from slotfill.nlp.core import UpdateMode
from slotfill.nlp.promptgen import TokenBudget, TokenCounter, resolve_counter

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"


class BackendKind(str, Enum):
    HTTP = "HTTP"
    ORACLE = "ORACLE"
    CORRUPT = "CORRUPT"
    MOCK_DELAY = "MOCK_DELAY"


# Request templates use "{{name}}" placeholders; a string that is exactly one
# placeholder is replaced by the typed value.
PRESETS: Dict[str, Dict[str, Any]] = {
    "openai-completions": {
        "request_template": {
            "model": "{{model}}",
            "prompt": "{{prompt}}",
            "max_tokens": "{{max_new_tokens}}",
            "temperature": "{{temperature}}",
            "stop": "{{stop}}",
        },
        "response_path": "choices.0.text",
    },
    "openai-chat": {
        "request_template": {
            "model": "{{model}}",
            "messages": [{"role": "user", "content": "{{prompt}}"}],
            "max_tokens": "{{max_new_tokens}}",
            "temperature": "{{temperature}}",
            "stop": "{{stop}}",
        },
        "response_path": "choices.0.message.content",
    },
    "palm": {
        "request_template": {
            "prompt": {"text": "{{prompt}}"},
            "temperature": "{{temperature}}",
            "maxOutputTokens": "{{max_new_tokens}}",
            "stopSequences": "{{stop}}",
        },
        "response_path": "candidates.0.output",
    },
    "tgi": {
        "request_template": {
            "inputs": "{{prompt}}",
            "parameters": {
                "max_new_tokens": "{{max_new_tokens}}",
                "temperature": "{{temperature}}",
                "stop": "{{stop}}",
            },
        },
        "response_path": "generated_text",
    },
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BackendConfig(_Section):
    kind: BackendKind = BackendKind.HTTP
    preset: str | None = None
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    auth_header: str = "Authorization"
    auth_scheme: str = "Bearer"
    headers: Dict[str, str] = Field(default_factory=dict)
    request_template: Dict[str, Any] | None = None
    response_path: str | None = None
    timeout_s: float = Field(30.0, gt=0)
    retries: int = Field(2, ge=0)
    backoff_s: float = Field(0.5, ge=0)
    backoff_factor: float = Field(2.0, ge=1)
    retry_nonzero_temperature: bool = False
    stop_sequences: List[str] = Field(default_factory=list)
    temperature: float = Field(0.0, ge=0)
    # local backends
    dataset: str | None = None
    drop_k: int = Field(0, ge=0)
    seed: int = 0
    delay_ms: float = Field(0.0, ge=0)

    @field_validator("kind", mode="before")
    @classmethod
    def _upper_kind(cls, value: Any) -> Any:
        return value.strip().upper().replace("-", "_") if isinstance(value, str) else value

    @model_validator(mode="after")
    def _apply_preset(self) -> "BackendConfig":
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ValueError(f"unknown preset {self.preset!r} (known: {', '.join(sorted(PRESETS))})")
            preset = PRESETS[self.preset]
            if self.request_template is None:
                self.request_template = copy.deepcopy(preset["request_template"])
            if self.response_path is None:
                self.response_path = preset["response_path"]
        if self.kind is BackendKind.HTTP:
            if not self.endpoint:
                raise ValueError("an HTTP backend requires an endpoint")
            if self.request_template is None:
                self.request_template = {"prompt": "{{prompt}}", "max_new_tokens": "{{max_new_tokens}}"}
            if self.response_path is None:
                self.response_path = "text"
        return self

    def public_dict(self) -> Dict[str, Any]:
        """Config as it may appear in reports: never the secret, only its variable name."""
        return self.model_dump(mode="json", exclude={"headers"})


class TrackerSettings(_Section):
    mode: UpdateMode = UpdateMode.REPLACE
    max_prompt_tokens: int = Field(1200, ge=1)
    max_output_tokens: int = Field(270, ge=1)
    counter: str = "whitespace"
    fuzzy_threshold: float = Field(0.8, ge=0, le=1)
    repair_substring: bool = False

    @field_validator("mode", mode="before")
    @classmethod
    def _parse_mode(cls, value: Any) -> Any:
        return UpdateMode.parse(value) if isinstance(value, str) else value

    @property
    def budget(self) -> TokenBudget:
        return TokenBudget(self.max_prompt_tokens, self.max_output_tokens)

    @property
    def token_counter(self) -> TokenCounter:
        return resolve_counter(self.counter)


class ServerSettings(_Section):
    host: str = "127.0.0.1"
    port: int = Field(8000, ge=0, le=65535)
    store: str | None = None
    cors_origins: List[str] = Field(default_factory=lambda: ["*"])


class LoggingSettings(_Section):
    level: str = "INFO"
    format: str = LOG_FORMAT

    @field_validator("level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.strip().upper()
        if level not in logging.getLevelNamesMapping():
            raise ValueError(f"unknown log level {value!r}")
        return level


class AppSettings(_Section):
    backend: BackendConfig | None = None
    tracker: TrackerSettings = Field(default_factory=TrackerSettings)
    server: ServerSettings = Field(default_factory=ServerSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)


_SECTIONS: Dict[str, type[BaseModel]] = {
    "backend": BackendConfig,
    "tracker": TrackerSettings,
    "server": ServerSettings,
    "logging": LoggingSettings,
}


def _read_file(path: Path) -> Dict[str, Any]:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw.decode("utf-8"))
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a table/object at top level")
    return data


def _format_validation(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {err.get('msg')}")
    return "; ".join(parts)


def settings_from_dict(data: Dict[str, Any]) -> AppSettings:
    try:
        return AppSettings.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_format_validation(e)}") from None


def load_settings(path: str | Path | None = None) -> AppSettings:
    """Load settings; a file holding only backend keys is read as `[backend]`."""
    if path is None:
        return AppSettings()
    data = _read_file(Path(path))
    if data and not set(data) & set(AppSettings.model_fields):
        data = {"backend": data}
    return settings_from_dict(data)


def override(settings: AppSettings, section: str, **values: Any) -> AppSettings:
    """Return settings with CLI flag values applied; None means not given."""
    given = {k: v for k, v in values.items() if v is not None}
    if not given:
        return settings
    current = getattr(settings, section)
    merged = (current.model_dump() if current is not None else {}) | given
    try:
        updated = _SECTIONS[section].model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid {section} override: {_format_validation(e)}") from None
    return settings.model_copy(update={section: updated})


# ------------------------- Logging -------------------------
_SECRETS: Set[str] = set()
REDACTED = "***"


def register_secret(value: str) -> None:
    if value and len(value) >= 4:
        _SECRETS.add(value)
        install_secret_scrubber()


def scrub_record(record: logging.LogRecord) -> logging.LogRecord:
    """Redact registered secrets from the rendered message in place."""
    if not _SECRETS:
        return record
    try:
        message = record.getMessage()
    except (TypeError, ValueError):
        return record
    scrubbed = message
    for secret in _SECRETS:
        scrubbed = scrubbed.replace(secret, REDACTED)
    if scrubbed != message:
        record.msg = scrubbed
        record.args = None
    return record


def install_secret_scrubber() -> None:
    """Wrap the log-record factory so every record is scrubbed before any handler sees it."""
    current = logging.getLogRecordFactory()
    if getattr(current, "scrubs_secrets", False):
        return

    def factory(*args: Any, **kwargs: Any) -> logging.LogRecord:
        return scrub_record(current(*args, **kwargs))

    factory.scrubs_secrets = True  # type: ignore[attr-defined]
    logging.setLogRecordFactory(factory)


def configure_logging(settings: LoggingSettings | str | None = None) -> None:
    if settings is None:
        settings = LoggingSettings()
    elif isinstance(settings, str):
        try:
            settings = LoggingSettings(level=settings)
        except ValidationError as e:
            raise ConfigError(f"invalid log level: {_format_validation(e)}") from None
    logging.basicConfig(level=settings.level, format=settings.format, force=True)
    install_secret_scrubber()
    logger.debug("logging configured at %s", settings.level)
