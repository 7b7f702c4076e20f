from __future__ import annotations

import json

import httpx
import pytest

from overhear.backends import (
    BackendRequest,
    BackendResponse,
    BackendTimeout,
    HttpChatBackend,
    Message,
    ScriptedBackend,
    TableTranscriber,
    TransportError,
)
from overhear.core import Interval, ParseError, ValidationError
from overhear.protocol import PromptVariant


def _interval(index=0, transcript="hello"):
    return Interval(index=index, start_seconds=index * 10.0, transcript=transcript)


def _request(interval, messages=(), variant=PromptVariant()):
    return BackendRequest(messages=tuple(messages), new_interval=interval, variant=variant)


class TestBackendResponse:
    def test_requires_some_content(self):
        with pytest.raises(ValidationError):
            BackendResponse()

    def test_latency_non_negative(self):
        with pytest.raises(ValidationError):
            BackendResponse(raw_text="x", latency_ms=-1)


class TestScriptedBackend:
    def test_replays_by_interval_index(self, tmp_path):
        script = tmp_path / "script.jsonl"
        script.write_text(
            json.dumps({"interval": 0, "response_text": "Thought: a\nAction: None", "latency_ms": 120})
            + "\n"
            + json.dumps({"interval": 1, "response_text": "Thought: b\nAction: None"})
            + "\n",
            encoding="utf-8",
        )
        backend = ScriptedBackend.load(script)
        response = backend.complete(_request(_interval(0)))
        assert response.raw_text == "Thought: a\nAction: None"
        assert response.latency_ms == 120
        assert backend.complete(_request(_interval(1))).latency_ms == 0

    def test_exhausted_script_answers_none(self):
        backend = ScriptedBackend.from_records([])
        response = backend.complete(_request(_interval(5)))
        assert response.raw_text.endswith("Action: None")

    def test_default_respects_reasoning_variant(self):
        backend = ScriptedBackend.from_records([])
        with_thought = backend.complete(_request(_interval(0), variant=PromptVariant()))
        assert with_thought.raw_text.startswith("Thought:")
        bare = backend.complete(_request(_interval(0), variant=PromptVariant(reasoning=False)))
        assert bare.raw_text == "Action: None"

    def test_multi_round_responses_follow_context(self):
        backend = ScriptedBackend.from_records(
            [{"interval": 0, "response_text": ["first", "second"], "latency_ms": [10, 20]}]
        )
        interval = _interval(0)
        user = Message(role="user", text="hi")
        first = backend.complete(_request(interval, [user]))
        assert (first.raw_text, first.latency_ms) == ("first", 10)
        second = backend.complete(
            _request(interval, [user, Message(role="assistant", text="first"), Message(role="function", text="ok")])
        )
        assert (second.raw_text, second.latency_ms) == ("second", 20)
        third = backend.complete(
            _request(
                interval,
                [
                    user,
                    Message(role="assistant", text="first"),
                    Message(role="function", text="ok"),
                    Message(role="assistant", text="second"),
                ],
            )
        )
        assert third.raw_text.endswith("Action: None")

    def test_bad_script_record(self, tmp_path):
        script = tmp_path / "script.jsonl"
        script.write_text('{"interval": "zero"}\n', encoding="utf-8")
        with pytest.raises(ParseError):
            ScriptedBackend.load(script)

    def test_duplicate_interval_rejected(self, tmp_path):
        script = tmp_path / "script.jsonl"
        record = json.dumps({"interval": 0, "response_text": "x"})
        script.write_text(record + "\n" + record + "\n", encoding="utf-8")
        with pytest.raises(ParseError):
            ScriptedBackend.load(script)


class TestHttpChatBackend:
    def _backend(self, handler, **kwargs):
        backend = HttpChatBackend(base_url="http://mock", **kwargs)
        backend._client = httpx.Client(
            transport=httpx.MockTransport(handler), timeout=backend.timeout
        )
        return backend

    def test_sends_messages_and_reads_content(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen.update(json.loads(request.content))
            return httpx.Response(
                200, json={"choices": [{"message": {"content": "Thought: x\nAction: None"}}]}
            )

        backend = self._backend(handler, model="m1")
        response = backend.complete(
            _request(_interval(0), [Message(role="system", text="sys"), Message(role="user", text="hi")])
        )
        assert response.raw_text == "Thought: x\nAction: None"
        assert seen["model"] == "m1"
        assert seen["messages"][0] == {"role": "system", "content": "sys"}

    def test_audio_turns_sent_as_base64_parts(self):
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen.update(json.loads(request.content))
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        backend = self._backend(handler)
        audio = bytes(32)
        backend.complete(_request(_interval(0), [Message(role="user", audio=audio)]))
        part = seen["messages"][0]["content"][0]
        assert part["type"] == "input_audio"
        assert part["input_audio"]["format"] == "pcm16"

    def test_native_tool_calls_parsed(self):
        def handler(request: httpx.Request) -> httpx.Response:
            payload = json.loads(request.content)
            assert payload["tools"][0]["function"]["name"] == "npc_stage_event"
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {
                            "message": {
                                "content": "adding",
                                "tool_calls": [
                                    {
                                        "function": {
                                            "name": "npc_stage_event",
                                            "arguments": '{"event_type": "ADD_TO_STAGE", "npc": "Nemura"}',
                                        }
                                    }
                                ],
                            }
                        }
                    ]
                },
            )

        from overhear.stage import tool_schemas

        backend = self._backend(handler, native_tool_calls=True)
        request = BackendRequest(
            messages=(Message(role="user", text="hi"),),
            new_interval=_interval(0),
            variant=PromptVariant(),
            tool_schemas=tuple(tool_schemas()),
        )
        response = backend.complete(request)
        assert response.native_tool_calls[0].name == "npc_stage_event"

    def test_timeout_maps_to_backend_timeout(self):
        def handler(request: httpx.Request) -> httpx.Response:
            raise httpx.ConnectTimeout("slow")

        backend = self._backend(handler)
        with pytest.raises(BackendTimeout):
            backend.complete(_request(_interval(0), [Message(role="user", text="hi")]))

    def test_http_error_maps_to_transport_error(self):
        def handler(request: httpx.Request) -> httpx.Response:
            return httpx.Response(500, text="boom")

        backend = self._backend(handler)
        with pytest.raises(TransportError):
            backend.complete(_request(_interval(0), [Message(role="user", text="hi")]))

    def test_requires_base_url(self, monkeypatch):
        monkeypatch.delenv("OVERHEAR_BASE_URL", raising=False)
        with pytest.raises(ValidationError):
            HttpChatBackend()


class TestTableTranscriber:
    def test_keyed_by_index(self):
        transcriber = TableTranscriber({0: "hello"})
        interval = Interval(index=0, start_seconds=0, audio=bytes(64))
        assert transcriber.transcribe(interval) == "hello"

    def test_silence_for_unknown_index(self):
        transcriber = TableTranscriber({})
        interval = Interval(index=3, start_seconds=0, audio=bytes(64))
        assert transcriber.transcribe(interval) == ""

    def test_missing_audio_is_precondition_violation(self):
        transcriber = TableTranscriber({0: "hello"})
        interval = Interval(index=0, start_seconds=0, transcript="text only")
        with pytest.raises(ValidationError):
            transcriber.transcribe(interval)
