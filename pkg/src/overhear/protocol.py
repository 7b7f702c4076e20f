"""Prompt assembly and model-output parsing for the thought/action loop.

Prompts ship as data files under overhear/prompts so variant diffs stay
reviewable. A model turn is:

    [Transcript: <line>]      (transcribe-first variants only)
    [Thought: <block>]        (reasoning variants only)
    Action: None | {"name": ..., "parameters": {...}}

The parser is strict about the variant's section discipline so that it
agrees exactly with the emitted action grammar; recovery (treating a bad
turn as Action: None) is the engine's job, not the parser's.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .core import OverhearError
from .stage import SchemaViolation, ToolCall, UnknownTool, validate_call

THOUGHT_MARKER = "Thought:"
ACTION_MARKER = "Action:"
TRANSCRIPT_MARKER = "Transcript:"
NONE_ACTION = "None"

_ACTION_LINE_RE = re.compile(r"(?m)^Action:")


class ProtocolError(OverhearError):
    """A model turn does not conform to the expected output format."""


class NoActionSection(ProtocolError):
    pass


class MalformedActionJson(ProtocolError):
    pass


class UnknownToolName(ProtocolError):
    pass


class VariantMismatch(ProtocolError):
    """Transcript/Thought section presence does not match the prompt variant."""


class Modality(str, Enum):
    AUDIO = "audio"
    TEXT = "text"


@dataclass(frozen=True)
class PromptVariant:
    modality: Modality = Modality.AUDIO
    transcribe_first: bool = False
    reasoning: bool = True

    def __post_init__(self) -> None:
        if self.transcribe_first and self.modality is not Modality.AUDIO:
            raise OverhearError("transcribe_first requires the audio modality")

    def to_dict(self) -> dict:
        return {
            "modality": self.modality.value,
            "transcribe_first": self.transcribe_first,
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PromptVariant":
        return cls(
            modality=Modality(raw.get("modality", "audio")),
            transcribe_first=bool(raw.get("transcribe_first", False)),
            reasoning=bool(raw.get("reasoning", True)),
        )


@dataclass(frozen=True)
class ModelTurn:
    """Parsed model response. action is a ToolCall, or None for the None action."""

    action: ToolCall | None
    thought: str | None = None
    transcript_line: str | None = None
    warnings: tuple[str, ...] = field(default=())


def _prompt_text(name: str) -> str:
    return resources.files("overhear.prompts").joinpath(name).read_text(encoding="utf-8").rstrip("\n")


def build_system_prompt(variant: PromptVariant, player_characters: list[str]) -> str:
    """Assemble the system prompt for a variant, substituting the PC list."""
    paragraphs = _prompt_text("system_base.txt").split("\n\n")
    if variant.modality is Modality.TEXT:
        paragraphs[1] = _prompt_text("system_text_intro.txt")
    if not variant.reasoning:
        paragraphs[-1] = _prompt_text("system_no_reasoning_output.txt")
    if variant.transcribe_first:
        paragraphs.insert(len(paragraphs) - 1, _prompt_text("system_transcribe_insert.txt"))
    text = "\n\n".join(paragraphs)
    pc_list = "\n".join(f"- {name}" for name in player_characters) or "- (none listed)"
    return text.replace("{PLAYER_CHARACTER_LIST}", pc_list)


def _few_shot_messages() -> list[tuple[str, str]]:
    markers = {"USER: ": "user", "ASST: ": "assistant", "FUNC: ": "function"}
    messages: list[tuple[str, str]] = []
    for line in _prompt_text("few_shot.txt").split("\n"):
        for marker, role in markers.items():
            if line.startswith(marker):
                messages.append((role, line[len(marker):]))
                break
        else:
            if not messages:
                raise OverhearError("few-shot transcript must start with a role marker")
            role, content = messages[-1]
            messages[-1] = (role, content + "\n" + line)
    return messages


def build_few_shot(variant: PromptVariant) -> list[tuple[str, str]]:
    """The few-shot transcript as (role, content) messages, variant-adjusted.

    The terminal end-of-examples user message is always last.
    """
    messages = _few_shot_messages()
    out: list[tuple[str, str]] = []
    last_user = ""
    for role, content in messages:
        if role == "user":
            last_user = content
        elif role == "assistant":
            if not variant.reasoning:
                match = _ACTION_LINE_RE.search(content)
                if match is None:
                    raise OverhearError("few-shot assistant message lacks an Action line")
                content = content[match.start():]
            if variant.transcribe_first:
                content = f"{TRANSCRIPT_MARKER} {last_user}\n{content}"
        out.append((role, content))
    return out


def _extract_json_object(text: str) -> tuple[str, str]:
    """Return (object_text, remainder) for the first balanced JSON object."""
    start = text.index("{")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1], text[i + 1 :]
    raise MalformedActionJson("unterminated JSON object in action")


def _reject_duplicate_keys(pairs: list[tuple[str, object]]) -> dict:
    obj: dict = {}
    for key, value in pairs:
        if key in obj:
            raise SchemaViolation(f"duplicate key {key!r} in action JSON")
        obj[key] = value
    return obj


def _parse_action(body: str) -> tuple[ToolCall | None, list[str]]:
    warnings: list[str] = []
    inline = body.lstrip(" \t")
    if inline.startswith(NONE_ACTION):
        if inline[len(NONE_ACTION):].strip():
            raise MalformedActionJson("unexpected text after the None action")
        return None, warnings
    if not inline.startswith("{"):
        raise MalformedActionJson(f"action is neither None nor a JSON object: {inline[:40]!r}")
    object_text, remainder = _extract_json_object(inline)
    if remainder.strip():
        warnings.append(f"ignored trailing text after action JSON: {remainder.strip()[:60]!r}")
    try:
        obj = json.loads(object_text, object_pairs_hook=_reject_duplicate_keys)
    except SchemaViolation:
        raise
    except json.JSONDecodeError as exc:
        raise MalformedActionJson(f"invalid action JSON: {exc}") from exc
    extra = set(obj) - {"name", "parameters"}
    if extra:
        raise SchemaViolation(f"unexpected action fields: {sorted(extra)}")
    if "name" not in obj or not isinstance(obj["name"], str):
        raise SchemaViolation("action JSON requires a string 'name' field")
    if "parameters" not in obj or not isinstance(obj["parameters"], dict):
        raise SchemaViolation("action JSON requires an object 'parameters' field")
    try:
        call = validate_call(obj["name"], obj["parameters"])
    except UnknownTool as exc:
        raise UnknownToolName(str(exc)) from exc
    return call, warnings


def parse_turn(raw: str, variant: PromptVariant) -> ModelTurn:
    """Parse one complete model response into a ModelTurn.

    Raises a ProtocolError subclass (or SchemaViolation) when the turn does
    not conform; callers treat that as Action: None and log it.
    """
    transcript_line: str | None = None
    rest = raw
    if variant.transcribe_first:
        if not rest.startswith(TRANSCRIPT_MARKER):
            raise VariantMismatch("expected the turn to start with a Transcript line")
        newline = rest.find("\n")
        if newline < 0:
            raise NoActionSection("transcript line is never followed by an action")
        transcript_line = rest[len(TRANSCRIPT_MARKER):newline].strip()
        rest = rest[newline + 1 :]

    thought: str | None = None
    if variant.reasoning:
        if not rest.startswith(THOUGHT_MARKER):
            if rest.startswith(ACTION_MARKER):
                raise VariantMismatch("reasoning variants require a Thought section")
            raise NoActionSection("expected a Thought section before the action")
        matches = list(_ACTION_LINE_RE.finditer(rest))
        if not matches:
            raise NoActionSection("no Action line found")
        split = matches[-1]
        head = rest[: split.start()]
        thought = head[len(THOUGHT_MARKER):].strip()
        body = rest[split.end():]
    else:
        if rest.startswith(THOUGHT_MARKER):
            raise VariantMismatch("this variant must not output a Thought section")
        if not rest.startswith(ACTION_MARKER):
            raise NoActionSection("expected the turn to start with the Action line")
        body = rest[len(ACTION_MARKER):]

    action, warnings = _parse_action(body)
    return ModelTurn(
        action=action,
        thought=thought,
        transcript_line=transcript_line,
        warnings=tuple(warnings),
    )


def render_turn(turn: ModelTurn) -> str:
    """Inverse of parse_turn for canonical turns."""
    parts: list[str] = []
    if turn.transcript_line is not None:
        parts.append(f"{TRANSCRIPT_MARKER} {turn.transcript_line}")
    if turn.thought is not None:
        parts.append(f"{THOUGHT_MARKER} {turn.thought}")
    if turn.action is None:
        parts.append(f"{ACTION_MARKER} {NONE_ACTION}")
    else:
        payload = {"name": turn.action.name, "parameters": dict(turn.action.arguments)}
        parts.append(f"{ACTION_MARKER} {json.dumps(payload)}")
    return "\n".join(parts)
