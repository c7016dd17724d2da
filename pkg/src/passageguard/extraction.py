"""Stage 1: ask an extractor LLM for structured entities plus copied contexts.

The LLM is a black box behind a minimal transport interface (prompt in, text
out), so providers are interchangeable and tests can replay recorded
fixtures. The response wire format is a JSON object mapping each entity type
name to a list of {"value", "context"} items, or null when the type is
absent from the document.
"""
from __future__ import annotations

import json
import os
import re
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Protocol

from .config import EXTRACTOR_API_KEY_ENV
from .types import (
    Document,
    Entity,
    EntityKind,
    EntityType,
    PassageGuardError,
    Payload,
    DatePayload,
    schema_by_name,
    validate_entity,
)

DOCUMENT_PLACEHOLDER = "{document}"
ENTITY_TYPES_PLACEHOLDER = "{entity_types}"


class MissingPlaceholder(PassageGuardError):
    pass


class TransportError(PassageGuardError):
    pass


class ResponseNotParseable(PassageGuardError):
    pass


class LLMTransport(Protocol):
    """Anything that can turn a prompt into a completion text."""

    def send(self, prompt: str) -> str: ...


@dataclass(frozen=True)
class ExtractionRequest:
    doc: Document
    schema: list[EntityType]
    prompt_template: str
    model_id: str
    max_retries: int = 2


@dataclass(frozen=True)
class ExtractionResponse:
    entities: list[Entity]
    raw_response: str
    model_id: str
    parse_warnings: list[str] = field(default_factory=list)
    attempts: int = 1


def default_prompt_template() -> str:
    return resources.files("passageguard.templates").joinpath(
        "extraction_prompt.txt").read_text(encoding="utf-8")


def _type_instruction(et: EntityType) -> str:
    if et.kind is EntityKind.STRUCTURED_DATE:
        detail = 'value is an object {"yyyy": "YYYY", "mm": "MM", "dd": "DD"}; omit unknown parts'
    elif et.kind is EntityKind.CATEGORICAL:
        assert et.allowed_values is not None
        detail = "value is exactly one of: " + ", ".join(et.allowed_values)
    else:
        detail = "value is the normalized text of the entity"
    return f"- {et.name}: {detail}"


def build_prompt(doc: Document, schema: list[EntityType], template: str) -> str:
    """Fill the task template with the document and per-type instructions."""
    for placeholder in (DOCUMENT_PLACEHOLDER, ENTITY_TYPES_PLACEHOLDER):
        if placeholder not in template:
            raise MissingPlaceholder(f"template is missing {placeholder}")
    type_block = "\n".join(_type_instruction(et) for et in schema)
    return template.replace(ENTITY_TYPES_PLACEHOLDER, type_block).replace(
        DOCUMENT_PLACEHOLDER, doc.text)


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _extract_json_object(text: str) -> dict[str, Any] | None:
    """Pull the first JSON object out of a completion, fenced or bare."""
    candidates = [m.group(1) for m in _FENCE_RE.finditer(text)]
    start = text.find("{")
    if start != -1:
        end = text.rfind("}")
        if end > start:
            candidates.append(text[start:end + 1])
    for cand in candidates:
        try:
            obj = json.loads(cand)
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict):
            return obj
    return None


def _date_part(raw: Any, width: int) -> str | None:
    if raw is None:
        return None
    if isinstance(raw, int):
        return str(raw).zfill(width)
    return str(raw).zfill(width)


def _payload_for(et: EntityType, value: Any) -> Payload:
    if et.kind is EntityKind.STRUCTURED_DATE:
        if not isinstance(value, dict) or "yyyy" not in value:
            raise PassageGuardError(f"date value must be an object with yyyy, got {value!r}")
        return Payload(date=DatePayload(
            yyyy=_date_part(value["yyyy"], 4) or "",
            mm=_date_part(value.get("mm"), 2),
            dd=_date_part(value.get("dd"), 2),
        ))
    if not isinstance(value, str):
        raise PassageGuardError(f"value for {et.name!r} must be a string, got {value!r}")
    if et.kind is EntityKind.CATEGORICAL:
        return Payload(category=value)
    return Payload(text=value)


def parse_response(
    raw: str, doc: Document, schema: list[EntityType], model_id: str
) -> tuple[list[Entity], list[str]]:
    """Parse one completion into validated entities plus per-item warnings.

    Raises ResponseNotParseable when no JSON object can be recovered at all;
    individually malformed items are dropped with a warning instead.
    """
    obj = _extract_json_object(raw)
    if obj is None:
        raise ResponseNotParseable("no JSON object found in model response")
    by_name = schema_by_name(schema)
    entities: list[Entity] = []
    warnings: list[str] = []
    ordinal = 0
    for type_name, items in obj.items():
        et = by_name.get(type_name)
        if et is None:
            warnings.append(f"unknown entity type in response: {type_name!r}")
            continue
        if items is None:
            continue  # type not found in the document
        if isinstance(items, dict):
            items = [items]
        if not isinstance(items, list):
            warnings.append(f"{type_name}: expected a list of items, got {type(items).__name__}")
            continue
        for item in items:
            try:
                if not isinstance(item, dict):
                    raise PassageGuardError(f"item must be an object, got {item!r}")
                payload = _payload_for(et, item.get("value"))
                entity = Entity(
                    entity_id=f"{doc.doc_id}:{model_id}:{ordinal}",
                    doc_id=doc.doc_id,
                    entity_type=et.name,
                    payload=payload,
                    context=str(item.get("context") or ""),
                    model_id=model_id,
                )
                entities.append(validate_entity(entity, schema))
                ordinal += 1
            except PassageGuardError as exc:
                warnings.append(f"{type_name}: dropped malformed item: {exc}")
    return entities, warnings


def extract(req: ExtractionRequest, transport: LLMTransport) -> ExtractionResponse:
    """Run one extraction round trip, retrying transport and parse failures."""
    prompt = build_prompt(req.doc, req.schema, req.prompt_template)
    attempts = 0
    last_error: PassageGuardError | None = None
    raw = ""
    while attempts <= req.max_retries:
        attempts += 1
        try:
            raw = transport.send(prompt)
        except TransportError as exc:
            last_error = exc
            continue
        try:
            entities, warnings = parse_response(raw, req.doc, req.schema, req.model_id)
        except ResponseNotParseable as exc:
            last_error = exc
            continue
        return ExtractionResponse(
            entities=entities,
            raw_response=raw,
            model_id=req.model_id,
            parse_warnings=warnings,
            attempts=attempts,
        )
    assert last_error is not None
    if isinstance(last_error, TransportError):
        raise TransportError(f"transport failed after {attempts} attempts: {last_error}")
    raise ResponseNotParseable(f"no parseable response after {attempts} attempts: {last_error}")


class HttpChatTransport:
    """Chat-completions HTTP adapter (OpenAI-compatible request/response shape).

    The API key comes from the environment only. A semaphore caps in-flight
    requests per transport instance, so one instance per provider enforces
    the per-provider parallelism limit.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key_env: str = EXTRACTOR_API_KEY_ENV,
        max_parallel: int = 4,
        timeout: float = 120.0,
        session: Any = None,
        request_json_output: bool = True,
    ) -> None:
        if not endpoint:
            raise PassageGuardError("transport endpoint is not configured")
        if session is None:
            import requests

            session = requests.Session()
        self._endpoint = endpoint
        self._model = model
        self._api_key = os.environ.get(api_key_env, "")
        self._timeout = timeout
        self._session = session
        self._semaphore = threading.Semaphore(max_parallel)
        self._request_json_output = request_json_output

    def send(self, prompt: str) -> str:
        body: dict[str, Any] = {
            "model": self._model,
            "messages": [{"role": "user", "content": prompt}],
        }
        if self._request_json_output:
            body["response_format"] = {"type": "json_object"}
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        with self._semaphore:
            try:
                resp = self._session.post(
                    self._endpoint, json=body, headers=headers, timeout=self._timeout
                )
            except Exception as exc:
                raise TransportError(f"request to {self._endpoint} failed: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"provider returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except Exception as exc:
            raise TransportError(f"unexpected provider response shape: {exc}") from exc


class FixtureTransport:
    """Replays recorded completions so every stage runs offline.

    Fixture file format: {"rules": [{"match": <substring of the prompt>,
    "response": <text or list of texts>}, ...], "default": <text>}.
    The first rule whose `match` occurs in the prompt wins; a list response
    is consumed one element per call (the last element repeats). A rule may
    use "error": true to simulate a transport failure.
    """

    def __init__(self, rules: list[dict[str, Any]], default: str | None = None) -> None:
        self._rules = [dict(rule) for rule in rules]
        self._default = default
        self._lock = threading.Lock()
        self._calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureTransport":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict) or "rules" not in obj:
            raise PassageGuardError(f"fixture file {path} must contain a 'rules' list")
        return cls(obj["rules"], obj.get("default"))

    @property
    def calls(self) -> list[str]:
        return list(self._calls)

    def send(self, prompt: str) -> str:
        with self._lock:
            self._calls.append(prompt)
            for rule in self._rules:
                if rule.get("match", "") in prompt:
                    if rule.get("error"):
                        raise TransportError(rule.get("detail", "simulated transport failure"))
                    response = rule.get("response", "")
                    if isinstance(response, list):
                        if not response:
                            raise TransportError("fixture rule has an empty response list")
                        if len(response) > 1:
                            value = response.pop(0)
                        else:
                            value = response[0]
                        if value is None:
                            raise TransportError("simulated transport failure")
                        return str(value)
                    return str(response)
            if self._default is not None:
                return str(self._default)
        raise TransportError("no fixture rule matches the prompt")
