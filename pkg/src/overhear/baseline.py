"""Naive name-matching baseline: suggest any corpus entity whose name occurs
in a transcript, and toggle an NPC's stage state on each name occurrence.

Intentionally stupid: word-boundary containment, no fuzzy matching.
"""

from __future__ import annotations

import re
from typing import Iterable

from .core import Interval, OverhearError, StageAction, Suggestion
from .gamedata import Corpus, fold


class MissingTranscript(OverhearError):
    """Baseline input interval lacks transcript text."""


def _name_pattern(name: str) -> re.Pattern:
    # Multi-word names match as contiguous word sequences after folding.
    words = [re.escape(word) for word in fold(name).split(" ")]
    return re.compile(r"(?<!\w)" + r"\s+".join(words) + r"(?!\w)")


def baseline_suggest(intervals: Iterable[Interval], corpus: Corpus) -> list[Suggestion]:
    """Scan each interval's transcript for entity and NPC names.

    Entity hits emit one game-data suggestion per entity per interval; NPC
    hits toggle a simulated stage (all NPCs start off stage), threaded
    across intervals. Deterministic in (transcripts, corpus).
    """
    entity_patterns = [(entity, _name_pattern(entity.name)) for entity in corpus.entities]
    npc_patterns = [(npc.name, _name_pattern(npc.name)) for npc in corpus.npcs]
    on_stage: set[str] = set()
    suggestions: list[Suggestion] = []
    for interval in intervals:
        if interval.transcript is None:
            raise MissingTranscript(f"interval {interval.index} has no transcript")
        haystack = fold(interval.transcript)
        for entity, pattern in entity_patterns:
            if pattern.search(haystack):
                suggestions.append(
                    Suggestion.game_data(interval.start_seconds, entity.entity_type, entity.name)
                )
        for name, pattern in npc_patterns:
            if pattern.search(haystack):
                if name in on_stage:
                    on_stage.discard(name)
                    action = StageAction.REMOVE
                else:
                    on_stage.add(name)
                    action = StageAction.ADD
                suggestions.append(Suggestion.stage_event(interval.start_seconds, action, name))
    return suggestions
