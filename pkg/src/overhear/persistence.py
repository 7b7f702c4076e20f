"""Append-only JSONL persistence per session, with crash recovery.

Data dir layout: {data_dir}/{session_id}/events.jsonl, feedback.jsonl,
annotations.jsonl, config.json. Corrupt lines are skipped with a warning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any

from .core import EventType, SessionEvent, StageAction, SuggestionKind, ValidationError
from .engine import SessionConfig, SessionState, new_session
from .gamedata import Corpus, NpcProfile
from .stage import GeneratedNpc

logger = logging.getLogger(__name__)


def session_dir(data_dir: str | Path, session_id: str) -> Path:
    return Path(data_dir) / session_id


def _append_jsonl(path: Path, record: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")
        fh.flush()


def append_event(data_dir: str | Path, event: SessionEvent) -> None:
    _append_jsonl(session_dir(data_dir, event.session_id) / "events.jsonl", event.to_dict())


def append_feedback(data_dir: str | Path, session_id: str, record: dict) -> None:
    _append_jsonl(session_dir(data_dir, session_id) / "feedback.jsonl", record)


def append_annotation(data_dir: str | Path, session_id: str, record: dict) -> None:
    _append_jsonl(session_dir(data_dir, session_id) / "annotations.jsonl", record)


def save_config(data_dir: str | Path, session_id: str, config: SessionConfig) -> None:
    path = session_dir(data_dir, session_id) / "config.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.to_dict(), indent=2), encoding="utf-8")


def load_config(data_dir: str | Path, session_id: str) -> SessionConfig | None:
    path = session_dir(data_dir, session_id) / "config.json"
    if not path.exists():
        return None
    return SessionConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))


def load_events(data_dir: str | Path, session_id: str) -> list[SessionEvent]:
    """Read a session's event log, skipping corrupt lines with a warning."""
    path = session_dir(data_dir, session_id) / "events.jsonl"
    if not path.exists():
        return []
    events: list[SessionEvent] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(SessionEvent.from_dict(json.loads(line)))
        except (json.JSONDecodeError, ValidationError, TypeError) as exc:
            logger.warning("skipping corrupt event line %s:%d: %s", path, lineno, exc)
    return events


def load_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            logger.warning("skipping corrupt line %s:%d: %s", path, lineno, exc)
    return records


def rebuild_state(
    session_id: str, config: SessionConfig, corpus: Corpus, events: list[SessionEvent]
) -> SessionState:
    """Reconstruct stage, clock, and counters from an event log.

    Conversation context is not recovered; a restarted session resumes with
    an empty rolling window.
    """
    state = new_session(session_id, config, corpus)
    stage = state.stage
    clock = 0.0
    last_start = 0.0
    last_index = -1
    next_seq = 1
    tool_calls = 0
    for event in events:
        next_seq = max(next_seq, event.seq + 1)
        if event.type is EventType.INTERVAL_RECEIVED:
            last_start = float(event.payload["start_seconds"])
            clock = last_start + float(event.payload["duration_seconds"])
            last_index = int(event.payload["index"])
        elif event.type is EventType.TOOL_CALL:
            tool_calls += 1
        elif event.type is EventType.TOOL_RESULT:
            delta = event.payload.get("state_delta")
            if delta and "improvised_npc_added" in delta:
                generated = GeneratedNpc(**delta["improvised_npc_added"])
                profile = NpcProfile(name=generated.name, description=generated.describe())
                if stage.resolve(profile.name) is None:
                    stage = replace(stage, improvised=stage.improvised + (profile,))
        elif event.type is EventType.SUGGESTION:
            if event.payload.get("kind") != SuggestionKind.STAGE_EVENT.value:
                continue
            npc = event.payload["npc"]
            if event.payload["action"] == StageAction.ADD.value:
                if not stage.is_on_stage(npc) and stage.resolve(npc) is not None:
                    stage = replace(stage, on_stage=stage.on_stage + (stage.resolve(npc),))
            else:
                stage = replace(
                    stage,
                    on_stage=tuple(n for n in stage.on_stage if n.lower() != npc.lower()),
                )
    return replace(
        state,
        stage=stage,
        clock=clock,
        last_start=last_start,
        last_index=last_index,
        next_seq=next_seq,
        tool_calls=tool_calls,
    )


def load_session(
    data_dir: str | Path, session_id: str, corpus: Corpus
) -> SessionState | None:
    """Recover a persisted session, or None when it does not exist."""
    config = load_config(data_dir, session_id)
    if config is None:
        return None
    events = load_events(data_dir, session_id)
    return rebuild_state(session_id, config, corpus, events)


def list_sessions(data_dir: str | Path) -> list[str]:
    root = Path(data_dir)
    if not root.exists():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "config.json").exists())


def suggestion_records_from_events(events: list[SessionEvent]) -> list[dict[str, Any]]:
    """Suggestion JSONL rows (with ids) extracted from an event log."""
    rows = []
    for event in events:
        if event.type is EventType.SUGGESTION:
            rows.append(dict(event.payload))
    return rows
