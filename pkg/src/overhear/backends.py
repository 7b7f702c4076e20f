"""Model and transcription providers behind uniform contracts.

The scripted backend replays canned responses by interval index so whole
sessions can be driven deterministically in tests and offline replays; the
HTTP backend speaks a generic chat-completions wire shape with no
vendor-specific code paths beyond "native tool calls: yes/no".
"""

from __future__ import annotations

import base64
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Protocol, runtime_checkable

import httpx

from .core import Interval, OverhearError, ParseError, ValidationError
from .stage import ToolCall

DEFAULT_TIMEOUT_SECONDS = 30.0
BASE_URL_ENV = "OVERHEAR_BASE_URL"
API_KEY_ENV = "OVERHEAR_API_KEY"


class BackendError(OverhearError):
    pass


class BackendTimeout(BackendError):
    pass


class TransportError(BackendError):
    pass


@dataclass(frozen=True)
class Message:
    """One context turn. Roles: system, user, assistant, function."""

    role: str
    text: str | None = None
    audio: bytes | None = None


@dataclass(frozen=True)
class BackendRequest:
    messages: tuple[Message, ...]
    new_interval: Interval
    variant: Any = None
    tool_schemas: tuple = ()


@dataclass(frozen=True)
class BackendResponse:
    raw_text: str | None = None
    native_tool_calls: tuple[ToolCall, ...] | None = None
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if self.raw_text is None and not self.native_tool_calls:
            raise ValidationError("backend response carries neither text nor tool calls")
        if self.latency_ms < 0:
            raise ValidationError("latency_ms must be >= 0")


@runtime_checkable
class ModelBackend(Protocol):
    def complete(self, request: BackendRequest) -> BackendResponse:
        """Produce one model turn. Raises BackendTimeout or TransportError."""
        ...


def _rounds_consumed(messages: Iterable[Message]) -> int:
    """Assistant turns since the last user turn; identifies the tool round
    within the current interval without backend-side state."""
    count = 0
    for message in messages:
        if message.role == "user":
            count = 0
        elif message.role == "assistant":
            count += 1
    return count


@dataclass
class _ScriptEntry:
    responses: list[str]
    latencies: list[int]


class ScriptedBackend:
    """Replays a JSONL script keyed by interval index.

    One record per interval: {"interval": i, "response_text": str | [str],
    "latency_ms": int | [int]}. Multi-element response lists feed successive
    tool rounds within that interval; an exhausted script answers with the
    None action. Reported latencies are injected, not measured.
    """

    simulates_latency = True

    def __init__(self, entries: dict[int, _ScriptEntry] | None = None):
        self._entries = entries or {}

    @classmethod
    def load(cls, path: str | Path) -> "ScriptedBackend":
        entries: dict[int, _ScriptEntry] = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                index = int(rec["interval"])
                responses = rec["response_text"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad script record: {exc}", line=lineno) from exc
            if isinstance(responses, str):
                responses = [responses]
            if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
                raise ParseError("response_text must be a string or list of strings", line=lineno)
            latency = rec.get("latency_ms", 0)
            latencies = latency if isinstance(latency, list) else [latency for _ in responses]
            if index in entries:
                raise ParseError(f"duplicate script entry for interval {index}", line=lineno)
            entries[index] = _ScriptEntry(responses=list(responses), latencies=[int(l) for l in latencies])
        return cls(entries)

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "ScriptedBackend":
        entries: dict[int, _ScriptEntry] = {}
        for rec in records:
            responses = rec["response_text"]
            if isinstance(responses, str):
                responses = [responses]
            latency = rec.get("latency_ms", 0)
            latencies = latency if isinstance(latency, list) else [latency for _ in responses]
            entries[int(rec["interval"])] = _ScriptEntry(list(responses), [int(l) for l in latencies])
        return cls(entries)

    def _default_response(self, request: BackendRequest) -> BackendResponse:
        reasoning = getattr(request.variant, "reasoning", False)
        if reasoning:
            return BackendResponse(raw_text="Thought: Script exhausted; nothing to do.\nAction: None")
        return BackendResponse(raw_text="Action: None")

    def complete(self, request: BackendRequest) -> BackendResponse:
        entry = self._entries.get(request.new_interval.index)
        if entry is None:
            return self._default_response(request)
        round_index = _rounds_consumed(request.messages)
        if round_index >= len(entry.responses):
            return self._default_response(request)
        latency = entry.latencies[round_index] if round_index < len(entry.latencies) else 0
        return BackendResponse(raw_text=entry.responses[round_index], latency_ms=latency)


class HttpChatBackend:
    """Generic HTTP chat-completions client.

    Audio turns are sent base64-encoded as pcm16/16 kHz input parts. When
    native_tool_calls is set, tool schemas ride along and returned tool
    calls are consumed directly instead of parsing the text protocol.
    """

    simulates_latency = False

    def __init__(
        self,
        base_url: str | None = None,
        model: str = "default",
        native_tool_calls: bool = False,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        api_key: str | None = None,
    ):
        base = base_url or os.environ.get(BASE_URL_ENV)
        if not base:
            raise ValidationError(f"no base URL given and {BASE_URL_ENV} is unset")
        self.base_url = base.rstrip("/")
        self.model = model
        self.native_tool_calls = native_tool_calls
        self.timeout = timeout
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._client: httpx.Client | None = None

    def _client_instance(self) -> httpx.Client:
        if self._client is None:
            headers = {}
            if self.api_key:
                headers["Authorization"] = f"Bearer {self.api_key}"
            self._client = httpx.Client(timeout=self.timeout, headers=headers)
        return self._client

    @staticmethod
    def _wire_message(message: Message) -> dict:
        role = "tool" if message.role == "function" else message.role
        if message.audio is not None:
            content: Any = [
                {
                    "type": "input_audio",
                    "input_audio": {
                        "data": base64.b64encode(message.audio).decode("ascii"),
                        "format": "pcm16",
                        "sample_rate": 16000,
                    },
                }
            ]
            if message.text:
                content.insert(0, {"type": "text", "text": message.text})
        else:
            content = message.text or ""
        return {"role": role, "content": content}

    def complete(self, request: BackendRequest) -> BackendResponse:
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": [self._wire_message(m) for m in request.messages],
        }
        if self.native_tool_calls and request.tool_schemas:
            payload["tools"] = [
                {"type": "function", "function": dict(schema)} for schema in request.tool_schemas
            ]
        started = time.monotonic()
        try:
            response = self._client_instance().post(f"{self.base_url}/chat/completions", json=payload)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"backend timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        elapsed_ms = int((time.monotonic() - started) * 1000)
        if response.status_code >= 400:
            raise TransportError(f"backend returned HTTP {response.status_code}: {response.text[:200]}")
        try:
            message = response.json()["choices"][0]["message"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"malformed backend response: {exc}") from exc
        calls: list[ToolCall] = []
        for call in message.get("tool_calls") or []:
            try:
                fn = call["function"]
                arguments = json.loads(fn.get("arguments") or "{}")
                calls.append(ToolCall(name=fn["name"], arguments=arguments))
            except (KeyError, ValueError) as exc:
                raise TransportError(f"malformed native tool call: {exc}") from exc
        return BackendResponse(
            raw_text=message.get("content"),
            native_tool_calls=tuple(calls) if calls else None,
            latency_ms=elapsed_ms,
        )


@runtime_checkable
class Transcriber(Protocol):
    def transcribe(self, interval: Interval) -> str:
        """Transcript text for one interval. Raises TransportError."""
        ...


class TableTranscriber:
    """Deterministic fake keyed by interval index; unknown indexes are silence."""

    def __init__(self, table: dict[int, str] | None = None):
        self.table = dict(table or {})

    def transcribe(self, interval: Interval) -> str:
        if not interval.audio:
            raise ValidationError("interval has no audio to transcribe")
        return self.table.get(interval.index, "")


class HttpTranscriber:
    """Minimal remote ASR client: POST audio as base64, receive {"text": ...}."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT_SECONDS):
        self.url = url
        self.timeout = timeout

    def transcribe(self, interval: Interval) -> str:
        if not interval.audio:
            raise ValidationError("interval has no audio to transcribe")
        payload = {
            "audio_b64": base64.b64encode(interval.audio).decode("ascii"),
            "format": "pcm16",
            "sample_rate": 16000,
        }
        try:
            response = httpx.post(self.url, json=payload, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"transcriber timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if response.status_code >= 400:
            raise TransportError(f"transcriber returned HTTP {response.status_code}")
        try:
            return response.json()["text"]
        except (KeyError, ValueError) as exc:
            raise TransportError(f"malformed transcriber response: {exc}") from exc
