"""Shared vocabulary types: intervals, suggestions, session events, match config.

Everything here is an immutable value object with a canonical wire form:
flat records with lower_snake_case keys, used in JSONL logs and over the
WebSocket API.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Union

PCM16_BYTES_PER_SECOND = 16_000 * 2  # mono 16 kHz, 16-bit signed LE
DEFAULT_INTERVAL_SECONDS = 10.0
MAX_INTERVAL_SECONDS = 30.0


class OverhearError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OverhearError):
    """A record failed domain validation."""


class MissingPayload(ValidationError):
    """Interval carries neither audio nor transcript."""


class BadAudioFormat(ValidationError):
    """Audio byte payload is not valid PCM16 (length not a multiple of 2)."""


class ParseError(OverhearError):
    """A file or wire record could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EntityType(str, Enum):
    SPELL = "spell"
    CLASS_FEATURE = "class_feature"
    MONSTER = "monster"
    ITEM = "item"
    RACE = "race"
    CLASS = "class"
    BACKGROUND = "background"

    @classmethod
    def parse(cls, raw: str) -> "EntityType":
        """Map a string to a member, case-insensitively. Raises ValueError."""
        try:
            return cls(raw.lower())
        except (ValueError, AttributeError):
            raise ValueError(f"unknown entity type: {raw!r}") from None


class SuggestionKind(str, Enum):
    GAME_DATA = "game_data"
    STAGE_EVENT = "stage_event"
    NPC_SPEECH = "npc_speech"
    IMPROVISED_NPC = "improvised_npc"


class StageAction(str, Enum):
    ADD = "add"
    REMOVE = "remove"


class EventType(str, Enum):
    INTERVAL_RECEIVED = "interval_received"
    TRANSCRIPT_READY = "transcript_ready"
    MODEL_THOUGHT = "model_thought"
    TOOL_CALL = "tool_call"
    TOOL_RESULT = "tool_result"
    SUGGESTION = "suggestion"
    CONTEXT_TRUNCATED = "context_truncated"
    TIMING = "timing"
    ERROR = "error"


@dataclass(frozen=True)
class Interval:
    """One slice of conversation: audio bytes and/or transcript text.

    Timestamps are session-relative seconds. Audio is PCM16 mono 16 kHz;
    callers must decode/resample before constructing an Interval.
    """

    index: int
    start_seconds: float
    duration_seconds: float = DEFAULT_INTERVAL_SECONDS
    audio: bytes | None = None
    transcript: str | None = None

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValidationError(f"index must be >= 0, got {self.index}")
        if self.start_seconds < 0:
            raise ValidationError(f"start_seconds must be >= 0, got {self.start_seconds}")
        if not 0 < self.duration_seconds <= MAX_INTERVAL_SECONDS:
            raise ValidationError(
                f"duration_seconds must be in (0, {MAX_INTERVAL_SECONDS}], got {self.duration_seconds}"
            )
        if not self.audio and self.transcript is None:
            raise MissingPayload("interval carries neither audio nor transcript")
        if self.audio is not None and len(self.audio) % 2 != 0:
            raise BadAudioFormat(f"PCM16 payload length must be even, got {len(self.audio)} bytes")

    @property
    def end_seconds(self) -> float:
        return self.start_seconds + self.duration_seconds

    def to_dict(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "index": self.index,
            "start_seconds": self.start_seconds,
            "duration_seconds": self.duration_seconds,
        }
        if self.audio:
            rec["audio_b64"] = base64.b64encode(self.audio).decode("ascii")
        if self.transcript is not None:
            rec["transcript"] = self.transcript
        return rec

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Interval":
        return validate_interval(raw)


def validate_interval(raw: Mapping[str, Any]) -> Interval:
    """Build a validated Interval from a decoded wire/file record.

    Missing duration_seconds is normalized to 10.0. Audio may arrive as
    raw bytes under "audio" or base64 text under "audio_b64".
    """
    if not isinstance(raw, Mapping):
        raise ValidationError(f"expected a record, got {type(raw).__name__}")
    audio = raw.get("audio")
    if audio is None and raw.get("audio_b64") is not None:
        try:
            audio = base64.b64decode(raw["audio_b64"], validate=True)
        except Exception as exc:
            raise BadAudioFormat(f"audio_b64 is not valid base64: {exc}") from exc
    if audio is not None and not isinstance(audio, (bytes, bytearray)):
        raise BadAudioFormat(f"audio must be bytes, got {type(audio).__name__}")
    transcript = raw.get("transcript")
    if transcript is not None and not isinstance(transcript, str):
        raise ValidationError("transcript must be text")
    try:
        index = int(raw["index"])
        start = float(raw["start_seconds"])
    except KeyError as exc:
        raise ValidationError(f"missing required field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad numeric field: {exc}") from None
    duration = raw.get("duration_seconds")
    duration = DEFAULT_INTERVAL_SECONDS if duration is None else float(duration)
    return Interval(
        index=index,
        start_seconds=start,
        duration_seconds=duration,
        audio=bytes(audio) if audio is not None else None,
        transcript=transcript,
    )


@dataclass(frozen=True)
class GameDataPayload:
    entity_type: EntityType
    name: str


@dataclass(frozen=True)
class StageEventPayload:
    action: StageAction
    npc: str


@dataclass(frozen=True)
class NpcSpeechPayload:
    npc: str
    speech: str

    def __post_init__(self) -> None:
        if not self.speech:
            raise ValidationError("npc_speech requires non-empty speech text")


@dataclass(frozen=True)
class ImprovisedNpcPayload:
    race: str | None = None
    background: str | None = None
    culture: str | None = None


SuggestionPayload = Union[GameDataPayload, StageEventPayload, NpcSpeechPayload, ImprovisedNpcPayload]

_PAYLOAD_TYPES: dict[SuggestionKind, type] = {
    SuggestionKind.GAME_DATA: GameDataPayload,
    SuggestionKind.STAGE_EVENT: StageEventPayload,
    SuggestionKind.NPC_SPEECH: NpcSpeechPayload,
    SuggestionKind.IMPROVISED_NPC: ImprovisedNpcPayload,
}


@dataclass(frozen=True)
class Suggestion:
    """A timestamped, typed assistance event shown to the operator.

    Payload/kind coherence is checked at construction so downstream code
    never has to re-validate.
    """

    kind: SuggestionKind
    at_seconds: float
    payload: SuggestionPayload

    def __post_init__(self) -> None:
        if self.at_seconds < 0:
            raise ValidationError(f"at_seconds must be >= 0, got {self.at_seconds}")
        expected = _PAYLOAD_TYPES[self.kind]
        if type(self.payload) is not expected:
            raise ValidationError(
                f"suggestion kind {self.kind.value} requires {expected.__name__}, "
                f"got {type(self.payload).__name__}"
            )

    @classmethod
    def game_data(cls, at_seconds: float, entity_type: EntityType, name: str) -> "Suggestion":
        return cls(SuggestionKind.GAME_DATA, at_seconds, GameDataPayload(entity_type, name))

    @classmethod
    def stage_event(cls, at_seconds: float, action: StageAction, npc: str) -> "Suggestion":
        return cls(SuggestionKind.STAGE_EVENT, at_seconds, StageEventPayload(action, npc))

    @classmethod
    def npc_speech(cls, at_seconds: float, npc: str, speech: str) -> "Suggestion":
        return cls(SuggestionKind.NPC_SPEECH, at_seconds, NpcSpeechPayload(npc, speech))

    @classmethod
    def improvised_npc(
        cls,
        at_seconds: float,
        race: str | None = None,
        background: str | None = None,
        culture: str | None = None,
    ) -> "Suggestion":
        return cls(SuggestionKind.IMPROVISED_NPC, at_seconds, ImprovisedNpcPayload(race, background, culture))

    def to_dict(self) -> dict[str, Any]:
        rec: dict[str, Any] = {"kind": self.kind.value, "at_seconds": self.at_seconds}
        p = self.payload
        if isinstance(p, GameDataPayload):
            rec["entity_type"] = p.entity_type.value
            rec["name"] = p.name
        elif isinstance(p, StageEventPayload):
            rec["action"] = p.action.value
            rec["npc"] = p.npc
        elif isinstance(p, NpcSpeechPayload):
            rec["npc"] = p.npc
            rec["speech"] = p.speech
        else:
            for key in ("race", "background", "culture"):
                value = getattr(p, key)
                if value is not None:
                    rec[key] = value
        return rec

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Suggestion":
        try:
            kind = SuggestionKind(raw["kind"])
            at = float(raw["at_seconds"])
        except KeyError as exc:
            raise ValidationError(f"missing required field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        try:
            if kind is SuggestionKind.GAME_DATA:
                return cls.game_data(at, EntityType.parse(raw["entity_type"]), raw["name"])
            if kind is SuggestionKind.STAGE_EVENT:
                return cls.stage_event(at, StageAction(raw["action"]), raw["npc"])
            if kind is SuggestionKind.NPC_SPEECH:
                return cls.npc_speech(at, raw["npc"], raw["speech"])
            return cls.improvised_npc(at, raw.get("race"), raw.get("background"), raw.get("culture"))
        except KeyError as exc:
            raise ValidationError(f"missing payload field {exc.args[0]!r} for kind {kind.value}") from None
        except ValueError as exc:
            raise ValidationError(str(exc)) from None


_EVENT_ENVELOPE_KEYS = ("session_id", "seq", "wall_clock_ms", "session_seconds", "type")


@dataclass(frozen=True)
class SessionEvent:
    """One append-only log record; totally ordered by (wall_clock_ms, seq)."""

    session_id: str
    seq: int
    wall_clock_ms: int
    session_seconds: float
    type: EventType
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.session_seconds < 0:
            raise ValidationError(f"session_seconds must be >= 0, got {self.session_seconds}")

    def to_dict(self) -> dict[str, Any]:
        rec: dict[str, Any] = {
            "session_id": self.session_id,
            "seq": self.seq,
            "wall_clock_ms": self.wall_clock_ms,
            "session_seconds": self.session_seconds,
            "type": self.type.value,
        }
        for key, value in self.payload.items():
            if key in _EVENT_ENVELOPE_KEYS:
                raise ValidationError(f"payload key {key!r} collides with event envelope")
            rec[key] = value
        return rec

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "SessionEvent":
        try:
            envelope = {key: raw[key] for key in _EVENT_ENVELOPE_KEYS}
        except KeyError as exc:
            raise ValidationError(f"missing required field {exc.args[0]!r}") from None
        payload = {k: v for k, v in raw.items() if k not in _EVENT_ENVELOPE_KEYS}
        try:
            event_type = EventType(envelope["type"])
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        return cls(
            session_id=envelope["session_id"],
            seq=int(envelope["seq"]),
            wall_clock_ms=int(envelope["wall_clock_ms"]),
            session_seconds=float(envelope["session_seconds"]),
            type=event_type,
            payload=payload,
        )


@dataclass(frozen=True)
class MatchConfig:
    """Temporal-matching knobs for the evaluator: 300 s window, 0.8 speech similarity."""

    window_seconds: float = 300.0
    speech_similarity_threshold: float = 0.8

    def __post_init__(self) -> None:
        if self.window_seconds <= 0:
            raise ValidationError("window_seconds must be positive")
        if not 0.0 <= self.speech_similarity_threshold <= 1.0:
            raise ValidationError("speech_similarity_threshold must be in [0, 1]")

    def to_dict(self) -> dict[str, float]:
        return {
            "window_seconds": self.window_seconds,
            "speech_similarity_threshold": self.speech_similarity_threshold,
        }

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "MatchConfig":
        return cls(
            window_seconds=float(raw.get("window_seconds", 300.0)),
            speech_similarity_threshold=float(raw.get("speech_similarity_threshold", 0.8)),
        )
