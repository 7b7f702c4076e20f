"""Game-entity corpus: load from disk, exact and fuzzy name search.

The similarity metric used for fuzzy ranking is normalized Levenshtein
over case/whitespace-folded text; the evaluator reuses it for speech
equivalence so one implementation serves both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from .core import EntityType, OverhearError, ParseError


class DuplicateEntity(OverhearError):
    """Two corpus entries collide on a case-insensitive name key."""


@dataclass(frozen=True)
class GameEntity:
    entity_type: EntityType
    name: str
    body: str
    source: str | None = None

    def to_dict(self) -> dict:
        rec = {"entity_type": self.entity_type.value, "name": self.name, "body": self.body}
        if self.source is not None:
            rec["source"] = self.source
        return rec


@dataclass(frozen=True)
class NpcProfile:
    name: str
    portrait_ref: str | None = None
    description: str | None = None

    def to_dict(self) -> dict:
        rec: dict = {"name": self.name}
        if self.portrait_ref is not None:
            rec["portrait_ref"] = self.portrait_ref
        if self.description is not None:
            rec["description"] = self.description
        return rec


@dataclass(frozen=True)
class Corpus:
    """Immutable after load; concurrent readers need no coordination."""

    entities: tuple[GameEntity, ...]
    npcs: tuple[NpcProfile, ...] = ()
    _by_key: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.entities:
            raise ParseError("empty corpus")
        by_key: dict[tuple[EntityType, str], GameEntity] = {}
        for entity in self.entities:
            key = (entity.entity_type, entity.name.lower())
            if key in by_key:
                raise DuplicateEntity(
                    f"duplicate {entity.entity_type.value} entry: {entity.name!r}"
                )
            by_key[key] = entity
        seen_npcs: set[str] = set()
        for npc in self.npcs:
            folded = npc.name.lower()
            if folded in seen_npcs:
                raise DuplicateEntity(f"duplicate NPC entry: {npc.name!r}")
            seen_npcs.add(folded)
        object.__setattr__(self, "_by_key", by_key)

    def exact(self, entity_type: EntityType, name: str) -> GameEntity | None:
        return self._by_key.get((entity_type, name.lower()))

    def of_type(self, entity_type: EntityType) -> list[GameEntity]:
        return [e for e in self.entities if e.entity_type is entity_type]


def load_corpus(path: str | Path) -> Corpus:
    """Load and validate a corpus JSON file.

    Expected shape: {"entities": [{entity_type, name, body, source?}, ...],
    "npcs": [{name, portrait_ref?, description?}, ...]}.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: corpus document must be a JSON object")
    entities = []
    for i, rec in enumerate(doc.get("entities", [])):
        try:
            entities.append(
                GameEntity(
                    entity_type=EntityType.parse(rec["entity_type"]),
                    name=rec["name"],
                    body=rec["body"],
                    source=rec.get("source"),
                )
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"bad entity record: {exc}", line=i) from exc
    npcs = []
    for i, rec in enumerate(doc.get("npcs", [])):
        try:
            npcs.append(
                NpcProfile(
                    name=rec["name"],
                    portrait_ref=rec.get("portrait_ref"),
                    description=rec.get("description"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad npc record: {exc}", line=i) from exc
    return Corpus(entities=tuple(entities), npcs=tuple(npcs))


def fold(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, trim."""
    return " ".join(text.split()).lower()


def levenshtein(a: str, b: str) -> int:
    """Edit distance (insert/delete/substitute, unit costs), two-row DP."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


@lru_cache(maxsize=65536)
def _folded_similarity(fa: str, fb: str) -> float:
    if not fa and not fb:
        return 1.0
    return 1.0 - levenshtein(fa, fb) / max(len(fa), len(fb))


def normalized_similarity(a: str, b: str) -> float:
    """Similarity in [0, 1]: 1 - distance / max-length over folded text.

    1.0 iff the folded strings are equal (defined as 1.0 when both fold
    to empty); symmetric in its arguments.
    """
    return _folded_similarity(fold(a), fold(b))


def search_entity(
    corpus: Corpus, entity_type: EntityType, name: str, k: int = 3
) -> list[GameEntity]:
    """Exact case-insensitive match wins outright; otherwise the top-k
    entities of that type by descending similarity, ties alphabetical.
    """
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    hit = corpus.exact(entity_type, name)
    if hit is not None:
        return [hit]
    candidates = corpus.of_type(entity_type)
    ranked = sorted(
        candidates,
        key=lambda e: (-normalized_similarity(name, e.name), e.name.lower(), e.name),
    )
    return ranked[:k]
