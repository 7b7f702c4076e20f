"""The overhearing loop: rolling context, model/tool cycle, event emission.

Intervals for one session are processed strictly in order. Context is
truncated by whole rounds (an interval turn plus its model/tool turns),
oldest first, keeping at most 900 seconds of interval audio by default;
the system prompt and few-shot examples are never truncated.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Iterable

from .backends import BackendError, BackendRequest, BackendResponse, Message, ModelBackend, Transcriber
from .core import EventType, Interval, OverhearError, SessionEvent, Suggestion, ValidationError
from .gamedata import Corpus
from .protocol import Modality, ModelTurn, ProtocolError, PromptVariant, build_few_shot, build_system_prompt
from .stage import SchemaViolation, StageState, ToolResult, UnknownTool, dispatch, initial_stage, tool_schemas

DEFAULT_CONTEXT_BUDGET_SECONDS = 900.0
DEFAULT_MAX_TOOL_ROUNDS = 5


class OutOfOrderInterval(OverhearError):
    """Interval index does not follow the previous one."""


class EmptyInput(OverhearError):
    pass


@dataclass(frozen=True)
class SessionConfig:
    context_budget_seconds: float = DEFAULT_CONTEXT_BUDGET_SECONDS
    max_tool_rounds_per_interval: int = DEFAULT_MAX_TOOL_ROUNDS
    variant: PromptVariant = PromptVariant()
    player_characters: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.context_budget_seconds <= 0:
            raise ValidationError("context_budget_seconds must be positive")
        if self.max_tool_rounds_per_interval < 1:
            raise ValidationError("max_tool_rounds_per_interval must be >= 1")

    def to_dict(self) -> dict:
        return {
            "context_budget_seconds": self.context_budget_seconds,
            "max_tool_rounds_per_interval": self.max_tool_rounds_per_interval,
            "variant": self.variant.to_dict(),
            "player_characters": list(self.player_characters),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SessionConfig":
        return cls(
            context_budget_seconds=float(raw.get("context_budget_seconds", DEFAULT_CONTEXT_BUDGET_SECONDS)),
            max_tool_rounds_per_interval=int(raw.get("max_tool_rounds_per_interval", DEFAULT_MAX_TOOL_ROUNDS)),
            variant=PromptVariant.from_dict(raw.get("variant", {})),
            player_characters=tuple(raw.get("player_characters", ())),
            seed=int(raw.get("seed", 0)),
        )


@dataclass(frozen=True)
class Round:
    """One interval turn plus the model/tool turns it provoked."""

    interval_index: int
    duration_seconds: float
    messages: tuple[Message, ...]


@dataclass(frozen=True)
class SessionState:
    session_id: str
    config: SessionConfig
    corpus: Corpus
    stage: StageState
    prefix: tuple[Message, ...]
    rounds: tuple[Round, ...] = ()
    clock: float = 0.0
    last_start: float = 0.0
    next_seq: int = 1
    last_index: int = -1
    tool_calls: int = 0

    def context_seconds(self) -> float:
        return sum(r.duration_seconds for r in self.rounds)

    def context_messages(self) -> tuple[Message, ...]:
        flat: list[Message] = list(self.prefix)
        for r in self.rounds:
            flat.extend(r.messages)
        return tuple(flat)


def new_session(session_id: str, config: SessionConfig, corpus: Corpus) -> SessionState:
    prefix = [Message(role="system", text=build_system_prompt(config.variant, list(config.player_characters)))]
    prefix.extend(Message(role=role, text=content) for role, content in build_few_shot(config.variant))
    return SessionState(
        session_id=session_id,
        config=config,
        corpus=corpus,
        stage=initial_stage(corpus),
        prefix=tuple(prefix),
    )


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


class _Emitter:
    def __init__(self, state: SessionState, session_seconds: float):
        self.session_id = state.session_id
        self.seq = state.next_seq
        self.session_seconds = session_seconds
        self.events: list[SessionEvent] = []

    def emit(self, event_type: EventType, payload: dict) -> SessionEvent:
        event = SessionEvent(
            session_id=self.session_id,
            seq=self.seq,
            wall_clock_ms=_now_ms(),
            session_seconds=self.session_seconds,
            type=event_type,
            payload=payload,
        )
        self.seq += 1
        self.events.append(event)
        return event

    def error(self, code: str, detail: str, severity: str = "error") -> SessionEvent:
        return self.emit(EventType.ERROR, {"error": code, "detail": detail, "severity": severity})


def _interval_message(
    interval: Interval, variant: PromptVariant, transcriber: Transcriber | None, emitter: _Emitter
) -> Message | None:
    """Build the user turn for an interval; None means transcription failed."""
    if variant.modality is Modality.TEXT:
        text = interval.transcript
        if text is None:
            if transcriber is None:
                emitter.error("no_transcriber", "text-modality session received an audio-only interval")
                return None
            try:
                text = transcriber.transcribe(interval)
            except (BackendError, ValidationError) as exc:
                emitter.error("transcription_failed", str(exc))
                return None
            emitter.emit(EventType.TRANSCRIPT_READY, {"index": interval.index, "transcript": text})
        return Message(role="user", text=text)
    if interval.audio:
        return Message(role="user", audio=interval.audio)
    return Message(role="user", text=interval.transcript)


def on_interval(
    state: SessionState,
    interval: Interval,
    backend: ModelBackend,
    transcriber: Transcriber | None = None,
) -> tuple[SessionState, list[SessionEvent]]:
    """Process one interval through the model/tool loop.

    Backend and parse failures become error events and the interval
    completes with None-action semantics; the engine never raises for them.
    """
    if interval.index != state.last_index + 1:
        raise OutOfOrderInterval(
            f"expected interval index {state.last_index + 1}, got {interval.index}"
        )
    if state.last_index >= 0 and interval.start_seconds < state.last_start:
        raise OutOfOrderInterval(
            f"interval {interval.index} starts at {interval.start_seconds}s, before the "
            f"previous interval's start {state.last_start}s"
        )
    config = state.config
    emitter = _Emitter(state, session_seconds=interval.start_seconds)
    payload = {
        "index": interval.index,
        "start_seconds": interval.start_seconds,
        "duration_seconds": interval.duration_seconds,
        "has_audio": bool(interval.audio),
    }
    if interval.transcript is not None:
        payload["transcript"] = interval.transcript
    emitter.emit(EventType.INTERVAL_RECEIVED, payload)

    stage = state.stage
    processing_seconds = 0.0
    dispatches = 0
    tool_counter = state.tool_calls
    round_messages: list[Message] = []
    schemas = tuple(tool_schemas())

    user_message = _interval_message(interval, config.variant, transcriber, emitter)
    if user_message is not None:
        round_messages.append(user_message)
        model_round = 0
        while True:
            if dispatches >= config.max_tool_rounds_per_interval:
                emitter.error(
                    "tool_round_cap",
                    f"forced stop after {dispatches} tool rounds in one interval",
                    severity="warning",
                )
                break
            request = BackendRequest(
                messages=state.context_messages() + tuple(round_messages),
                new_interval=interval,
                variant=config.variant,
                tool_schemas=schemas,
            )
            started = time.monotonic()
            try:
                response = backend.complete(request)
            except BackendError as exc:
                processing_seconds += time.monotonic() - started
                emitter.error(type(exc).__name__, str(exc))
                break
            if getattr(backend, "simulates_latency", False):
                processing_seconds += response.latency_ms / 1000.0
            else:
                processing_seconds += time.monotonic() - started
            model_round += 1

            calls, assistant_text, stop = _consume_response(response, config.variant, model_round, emitter)
            if assistant_text is not None:
                round_messages.append(Message(role="assistant", text=assistant_text))
            if stop:
                break
            for call in calls:
                if dispatches >= config.max_tool_rounds_per_interval:
                    break
                emitter.emit(
                    EventType.TOOL_CALL, {"tool": call.name, "arguments": dict(call.arguments)}
                )
                try:
                    stage, result = dispatch(
                        stage,
                        state.corpus,
                        call,
                        at_seconds=interval.start_seconds,
                        seed=config.seed * 100_003 + tool_counter,
                    )
                except (UnknownTool, SchemaViolation) as exc:
                    emitter.error(type(exc).__name__, str(exc))
                    result = ToolResult(ok=False, message=str(exc))
                dispatches += 1
                tool_counter += 1
                emitter.emit(
                    EventType.TOOL_RESULT,
                    {"ok": result.ok, "message": result.message, "state_delta": result.state_delta},
                )
                for suggestion in result.suggestions:
                    _emit_suggestion(emitter, suggestion)
                round_messages.append(Message(role="function", text=result.message))

    new_rounds = state.rounds + (
        Round(
            interval_index=interval.index,
            duration_seconds=interval.duration_seconds,
            messages=tuple(round_messages),
        ),
    )
    total = sum(r.duration_seconds for r in new_rounds)
    dropped = 0
    while total > config.context_budget_seconds and new_rounds:
        total -= new_rounds[0].duration_seconds
        new_rounds = new_rounds[1:]
        dropped += 1
    if dropped:
        emitter.emit(
            EventType.CONTEXT_TRUNCATED,
            {"dropped_rounds": dropped, "context_seconds": total},
        )
    emitter.emit(
        EventType.TIMING,
        {
            "index": interval.index,
            "interval_seconds": interval.duration_seconds,
            "processing_seconds": processing_seconds,
        },
    )

    new_state = replace(
        state,
        stage=stage,
        rounds=new_rounds,
        clock=interval.end_seconds,
        last_start=interval.start_seconds,
        next_seq=emitter.seq,
        last_index=interval.index,
        tool_calls=tool_counter,
    )
    return new_state, emitter.events


def _consume_response(
    response: BackendResponse, variant: PromptVariant, model_round: int, emitter: _Emitter
) -> tuple[list, str | None, bool]:
    """Returns (tool calls, assistant context text, stop-after flag)."""
    import json as _json

    from .protocol import parse_turn

    if response.native_tool_calls:
        thought = response.raw_text or ""
        emitter.emit(EventType.MODEL_THOUGHT, {"round": model_round, "thought": thought})
        rendered = response.raw_text or "\n".join(
            "Action: " + _json.dumps({"name": call.name, "parameters": dict(call.arguments)})
            for call in response.native_tool_calls
        )
        return list(response.native_tool_calls), rendered, False

    raw = response.raw_text or ""
    try:
        turn: ModelTurn = parse_turn(raw, variant)
    except (ProtocolError, SchemaViolation) as exc:
        emitter.error(type(exc).__name__, str(exc))
        return [], raw or None, True
    payload: dict = {"round": model_round, "thought": turn.thought}
    if turn.transcript_line is not None:
        payload["transcript_line"] = turn.transcript_line
    emitter.emit(EventType.MODEL_THOUGHT, payload)
    for warning in turn.warnings:
        emitter.error("parse_warning", warning, severity="warning")
    if turn.action is None:
        return [], raw, True
    return [turn.action], raw, False


def _emit_suggestion(emitter: _Emitter, suggestion: Suggestion) -> None:
    payload = {"suggestion_id": f"{emitter.session_id}:{emitter.seq}"}
    payload.update(suggestion.to_dict())
    emitter.emit(EventType.SUGGESTION, payload)


def relative_speed(events: Iterable[SessionEvent]) -> float:
    """Mean interval duration over mean processing time; >1 is faster than
    real time."""
    intervals: list[float] = []
    processing: list[float] = []
    for event in events:
        if event.type is EventType.TIMING:
            intervals.append(float(event.payload["interval_seconds"]))
            processing.append(float(event.payload["processing_seconds"]))
    if not intervals:
        raise EmptyInput("no timing events")
    mean_processing = sum(processing) / len(processing)
    if mean_processing == 0:
        return float("inf")
    return (sum(intervals) / len(intervals)) / mean_processing


def suggestions_from_events(events: Iterable[SessionEvent]) -> list[Suggestion]:
    """Extract the suggestion stream from an event log."""
    out = []
    for event in events:
        if event.type is EventType.SUGGESTION:
            rec = {k: v for k, v in event.payload.items() if k != "suggestion_id"}
            out.append(Suggestion.from_dict(rec))
    return out
