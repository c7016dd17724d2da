"""Shared value types: documents, entity schemas, extracted entities.

Everything here is an immutable value object. Instances are safe to share
across threads; all pipeline stages communicate by passing these around.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any


class PassageGuardError(Exception):
    """Base class for all errors raised by this package."""


class UnknownEntityType(PassageGuardError):
    pass


class PayloadKindMismatch(PassageGuardError):
    pass


class CategoricalValueNotAllowed(PassageGuardError):
    pass


class MalformedDate(PassageGuardError):
    pass


class EntityKind(str, Enum):
    STRUCTURED_DATE = "STRUCTURED_DATE"
    CATEGORICAL = "CATEGORICAL"
    FREE_TEXT = "FREE_TEXT"


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    source_path: str | None = None


@dataclass(frozen=True)
class EntityType:
    """One target type in a task schema, e.g. "Hearing Date" or "Judge Name"."""

    name: str
    kind: EntityKind
    allowed_values: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind is EntityKind.CATEGORICAL and not self.allowed_values:
            raise CategoricalValueNotAllowed(
                f"categorical type {self.name!r} needs a non-empty allowed_values list"
            )


@dataclass(frozen=True)
class DatePayload:
    """Zero-padded date parts; month and day are optional, day requires month.

    Parts are kept as strings (not ints) so values like mm="06" round-trip
    losslessly through JSON.
    """

    yyyy: str
    mm: str | None = None
    dd: str | None = None

    def validate(self) -> None:
        if len(self.yyyy) != 4 or not self.yyyy.isdigit():
            raise MalformedDate(f"yyyy must be a 4-digit string, got {self.yyyy!r}")
        if self.dd is not None and self.mm is None:
            raise MalformedDate("dd given without mm")
        if self.mm is not None:
            if len(self.mm) != 2 or not self.mm.isdigit() or not 1 <= int(self.mm) <= 12:
                raise MalformedDate(f"mm must be '01'..'12', got {self.mm!r}")
        if self.dd is not None:
            if len(self.dd) != 2 or not self.dd.isdigit() or not 1 <= int(self.dd) <= 31:
                raise MalformedDate(f"dd must be '01'..'31', got {self.dd!r}")

    def iso(self) -> str:
        """Dashed date string with absent parts omitted: 2012, 2012-01, 2012-01-17."""
        parts = [self.yyyy]
        if self.mm is not None:
            parts.append(self.mm)
            if self.dd is not None:
                parts.append(self.dd)
        return "-".join(parts)


@dataclass(frozen=True)
class Payload:
    """Tagged union: exactly one of date / category / text is set."""

    date: DatePayload | None = None
    category: str | None = None
    text: str | None = None

    def __post_init__(self) -> None:
        set_fields = [v for v in (self.date, self.category, self.text) if v is not None]
        if len(set_fields) != 1:
            raise PayloadKindMismatch("payload must set exactly one of date/category/text")

    @property
    def kind(self) -> EntityKind:
        if self.date is not None:
            return EntityKind.STRUCTURED_DATE
        if self.category is not None:
            return EntityKind.CATEGORICAL
        return EntityKind.FREE_TEXT

    def value_str(self) -> str:
        if self.date is not None:
            return self.date.iso()
        if self.category is not None:
            return self.category
        return self.text or ""

    def to_json(self) -> dict[str, Any]:
        if self.date is not None:
            d: dict[str, Any] = {"yyyy": self.date.yyyy}
            if self.date.mm is not None:
                d["mm"] = self.date.mm
            if self.date.dd is not None:
                d["dd"] = self.date.dd
            return {"date": d}
        if self.category is not None:
            return {"category": self.category}
        return {"text": self.text or ""}

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Payload":
        if not isinstance(obj, dict) or len(obj) != 1:
            raise PayloadKindMismatch(f"payload object must have exactly one key, got {obj!r}")
        if "date" in obj:
            d = obj["date"]
            if not isinstance(d, dict) or "yyyy" not in d:
                raise MalformedDate(f"date payload needs at least yyyy, got {d!r}")
            return cls(date=DatePayload(str(d["yyyy"]),
                                        None if d.get("mm") is None else str(d["mm"]),
                                        None if d.get("dd") is None else str(d["dd"])))
        if "category" in obj:
            return cls(category=str(obj["category"]))
        if "text" in obj:
            return cls(text=str(obj["text"]))
        raise PayloadKindMismatch(f"unknown payload variant in {obj!r}")


@dataclass(frozen=True)
class Entity:
    """One extracted item plus the context string the extractor claims to have copied.

    entity_id is assigned by the pipeline as "{doc_id}:{model_id}:{ordinal}".
    context may be empty only before alignment; the pipeline always rejects
    empty contexts.
    """

    entity_id: str
    doc_id: str
    entity_type: str
    payload: Payload
    context: str
    model_id: str

    def to_json(self) -> dict[str, Any]:
        return {
            "entity_id": self.entity_id,
            "doc_id": self.doc_id,
            "entity_type": self.entity_type,
            "payload": self.payload.to_json(),
            "context": self.context,
            "model_id": self.model_id,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "Entity":
        return cls(
            entity_id=str(obj["entity_id"]),
            doc_id=str(obj["doc_id"]),
            entity_type=str(obj["entity_type"]),
            payload=Payload.from_json(obj["payload"]),
            context=str(obj.get("context", "")),
            model_id=str(obj["model_id"]),
        )


def schema_by_name(schema: list[EntityType]) -> dict[str, EntityType]:
    by_name: dict[str, EntityType] = {}
    for et in schema:
        if et.name in by_name:
            raise PassageGuardError(f"duplicate entity type name in schema: {et.name!r}")
        by_name[et.name] = et
    return by_name


def validate_entity(entity: Entity, schema: list[EntityType]) -> Entity:
    """Check an entity against the task schema; returns it unchanged when valid.

    Idempotent: validating an already-validated entity succeeds.
    """
    if not schema:
        raise PassageGuardError("schema must be non-empty")
    by_name = schema_by_name(schema)
    etype = by_name.get(entity.entity_type)
    if etype is None:
        raise UnknownEntityType(f"no entity type named {entity.entity_type!r} in schema")
    if entity.payload.kind is not etype.kind:
        raise PayloadKindMismatch(
            f"{etype.name!r} expects {etype.kind.value}, got {entity.payload.kind.value}"
        )
    if entity.payload.date is not None:
        entity.payload.date.validate()
    if etype.kind is EntityKind.CATEGORICAL:
        assert etype.allowed_values is not None
        if entity.payload.category not in etype.allowed_values:
            raise CategoricalValueNotAllowed(
                f"{entity.payload.category!r} not in allowed values for {etype.name!r}: "
                f"{list(etype.allowed_values)}"
            )
    return entity


def document_to_json(doc: Document) -> dict[str, Any]:
    obj: dict[str, Any] = {"doc_id": doc.doc_id, "text": doc.text}
    if doc.source_path is not None:
        obj["source_path"] = doc.source_path
    return obj


def document_from_json(obj: dict[str, Any]) -> Document:
    return Document(doc_id=str(obj["doc_id"]), text=str(obj["text"]),
                    source_path=obj.get("source_path"))
