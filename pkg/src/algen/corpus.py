"""Data model: instances, taxonomies, labeled/unlabeled pools, JSONL persistence."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

ORIGINS = ("bootstrap", "human", "generated")

# Default six-class safety taxonomy; runs may supply their own.
DEFAULT_CLASSES = (
    "Self-Harm",
    "Medical-Advice",
    "Legal-Advice",
    "Financial-Advice",
    "Emergency-Situation",
    "Not-Harmful",
)

# Serialized field order is part of the on-disk contract.
_JSONL_KEYS = ("id", "text", "label", "origin", "parent_id", "iteration", "source")

_WS_RUN = re.compile(r"\s+")


class CorpusError(ValueError):
    """Raised for malformed corpus files and pool-contract violations."""


def dedup_key(text: str) -> str:
    """Case-folded, whitespace-collapsed, trimmed key used for duplicate detection."""
    return _WS_RUN.sub(" ", text.casefold()).strip()


class Taxonomy:
    """Ordered set of class names. Index positions are stable for a run."""

    def __init__(self, classes: Iterable[str]):
        classes = list(classes)
        if not classes:
            raise CorpusError("taxonomy must contain at least one class")
        seen: set[str] = set()
        for name in classes:
            if not isinstance(name, str) or not name.strip():
                raise CorpusError(f"class names must be non-empty strings, got {name!r}")
            folded = name.casefold()
            if folded in seen:
                raise CorpusError(f"duplicate class name (case-insensitive): {name!r}")
            seen.add(folded)
        self.classes: tuple[str, ...] = tuple(classes)
        self._index = {name: i for i, name in enumerate(self.classes)}

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Taxonomy) and self.classes == other.classes

    def __repr__(self) -> str:
        return f"Taxonomy({list(self.classes)!r})"

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise CorpusError(f"unknown label {label!r}; taxonomy is {list(self.classes)}") from None

    def to_dict(self) -> dict:
        return {"classes": list(self.classes)}

    @classmethod
    def from_dict(cls, data: dict) -> "Taxonomy":
        if not isinstance(data, dict) or "classes" not in data:
            raise CorpusError('taxonomy config must be an object {"classes": [...]}')
        return cls(data["classes"])

    @classmethod
    def load(cls, path: str | Path) -> "Taxonomy":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def default_taxonomy() -> Taxonomy:
    return Taxonomy(DEFAULT_CLASSES)


@dataclass
class Instance:
    """One text item, optionally labeled, with acquisition provenance.

    origin "bootstrap" marks raw or pre-run data, "human" marks in-run
    annotations, "generated" marks LLM variations (parent_id required).
    """

    id: str
    text: str
    label: str | None = None
    origin: str = "bootstrap"
    parent_id: str | None = None
    iteration: int | None = None
    source: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("instance id must be non-empty")
        if not self.text:
            raise CorpusError(f"instance {self.id!r} has empty text")
        if self.origin not in ORIGINS:
            raise CorpusError(f"instance {self.id!r}: origin must be one of {ORIGINS}, got {self.origin!r}")
        if self.origin == "generated" and not self.parent_id:
            raise CorpusError(f"generated instance {self.id!r} must carry parent_id")
        if self.iteration is not None and self.iteration < 0:
            raise CorpusError(f"instance {self.id!r}: iteration must be non-negative")

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in _JSONL_KEYS}

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        unknown = set(data) - set(_JSONL_KEYS)
        if unknown:
            raise CorpusError(f"unknown instance fields: {sorted(unknown)}")
        if "id" not in data or "text" not in data:
            raise CorpusError('instance record needs at least "id" and "text"')
        kwargs = {key: data.get(key) for key in _JSONL_KEYS if data.get(key) is not None}
        kwargs.setdefault("origin", "bootstrap")
        return cls(**kwargs)

    def copy(self) -> "Instance":
        return replace(self)


class Pool:
    """Ordered collection of instances, either all unlabeled (U) or all labeled (L)."""

    def __init__(self, kind: str, members: Iterable[Instance] = ()):
        if kind not in ("U", "L"):
            raise CorpusError(f'pool kind must be "U" or "L", got {kind!r}')
        self.kind = kind
        self._members: dict[str, Instance] = {}
        for inst in members:
            self.add(inst)

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self._members.values())

    def __contains__(self, instance_id: object) -> bool:
        return instance_id in self._members

    def ids(self) -> list[str]:
        return list(self._members)

    def get(self, instance_id: str) -> Instance:
        try:
            return self._members[instance_id]
        except KeyError:
            raise CorpusError(f"instance {instance_id!r} not in pool") from None

    def add(self, inst: Instance) -> None:
        if inst.id in self._members:
            raise CorpusError(f"duplicate instance id {inst.id!r}")
        if self.kind == "U" and inst.label is not None:
            raise CorpusError(f"labeled instance {inst.id!r} cannot join an unlabeled pool")
        if self.kind == "L" and inst.label is None:
            raise CorpusError(f"unlabeled instance {inst.id!r} cannot join a labeled pool")
        self._members[inst.id] = inst

    def remove(self, instance_id: str) -> Instance:
        try:
            return self._members.pop(instance_id)
        except KeyError:
            raise CorpusError(f"instance {instance_id!r} not in pool") from None

    def copy(self) -> "Pool":
        return Pool(self.kind, (inst.copy() for inst in self))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pool):
            return NotImplemented
        return self.kind == other.kind and [i.to_dict() for i in self] == [i.to_dict() for i in other]


def load_jsonl(path: str | Path, taxonomy: Taxonomy) -> Pool:
    """Load a pool from a JSONL file, inferring U/L from label presence.

    Files mixing labeled and unlabeled records are rejected so that pipeline
    mistakes surface at load time rather than mid-run.
    """
    instances: list[Instance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: malformed JSON on line {lineno}: {exc}") from None
            try:
                inst = Instance.from_dict(record)
            except CorpusError as exc:
                raise CorpusError(f"{path}: line {lineno}: {exc}") from None
            if inst.label is not None and inst.label not in taxonomy:
                raise CorpusError(
                    f"{path}: line {lineno}: unknown label {inst.label!r}; "
                    f"taxonomy is {list(taxonomy.classes)}"
                )
            instances.append(inst)
    labeled = sum(1 for inst in instances if inst.label is not None)
    if 0 < labeled < len(instances):
        raise CorpusError(f"{path}: mixed labeled/unlabeled records ({labeled}/{len(instances)} labeled)")
    kind = "L" if labeled else "U"
    pool = Pool(kind)
    for lineno, inst in enumerate(instances, start=1):
        try:
            pool.add(inst)
        except CorpusError as exc:
            raise CorpusError(f"{path}: {exc}") from None
    return pool


def save_jsonl(pool: Pool, path: str | Path) -> None:
    """Write one JSON object per line with fixed key order; load(save(p)) == p."""
    with open(path, "w", encoding="utf-8") as fh:
        for inst in pool:
            fh.write(json.dumps(inst.to_dict(), ensure_ascii=False) + "\n")


def promote(u: Pool, l: Pool, instance_id: str, label: str, taxonomy: Taxonomy, iteration: int | None = None) -> None:
    """Move an instance from U to L under a human-assigned label."""
    if instance_id in l:
        raise CorpusError(f"instance {instance_id!r} is already labeled")
    if instance_id not in u:
        raise CorpusError(f"instance {instance_id!r} not in unlabeled pool")
    if label not in taxonomy:
        raise CorpusError(f"unknown label {label!r}; taxonomy is {list(taxonomy.classes)}")
    inst = u.remove(instance_id)
    inst.label = label
    inst.origin = "human"
    inst.iteration = iteration
    l.add(inst)


@dataclass
class SplitSet:
    """Named, id-disjoint labeled splits plus per-strategy acquired train splits."""

    bootstrap: Pool
    dev: Pool
    test: Pool
    train: dict[str, Pool] = field(default_factory=dict)

    def validate(self) -> None:
        named = [("bootstrap", self.bootstrap), ("dev", self.dev), ("test", self.test)]
        named += sorted(self.train.items())
        seen: dict[str, str] = {}
        for split_name, pool in named:
            if pool.kind != "L":
                raise CorpusError(f"split {split_name!r} must be labeled")
            for instance_id in pool.ids():
                if instance_id in seen:
                    raise CorpusError(
                        f"instance {instance_id!r} appears in both {seen[instance_id]!r} and {split_name!r}"
                    )
                seen[instance_id] = split_name
