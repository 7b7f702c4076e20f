from __future__ import annotations

import base64
import json

import pytest
from fastapi.testclient import TestClient

from overhear.core import SessionEvent
from overhear.service import create_app

NEMURA_TURN = (
    'Thought: add her\nAction: {"name": "npc_stage_event", '
    '"parameters": {"event_type": "ADD_TO_STAGE", "npc": "Nemura"}}'
)

SCRIPT = [
    {
        "interval": 0,
        "response_text": [
            'Thought: search\nAction: {"name": "search_dnd", "parameters": {"entity_type": "spell", "name": "Augury"}}',
            "Thought: done\nAction: None",
        ],
    },
    {"interval": 1, "response_text": [NEMURA_TURN, "Thought: done\nAction: None"]},
]


@pytest.fixture()
def app_factory(corpus, tmp_path):
    def factory():
        return create_app(corpus, tmp_path, default_backend={"type": "scripted"})

    return factory


@pytest.fixture()
def client(corpus, tmp_path):
    app = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
    with TestClient(app) as c:
        yield c


def _scripted_session(client, script=SCRIPT, **config):
    service = client.app.state.service
    body = dict(config)
    body["backend"] = {"type": "scripted"}
    response = client.post("/sessions", json={**body, "variant": {"modality": "text"}})
    assert response.status_code == 201
    session_id = response.json()["session_id"]
    from overhear.backends import ScriptedBackend

    service.sessions[session_id].backend = ScriptedBackend.from_records(script)
    return session_id


class TestSessionLifecycle:
    def test_create_and_list(self, client):
        session_id = _scripted_session(client)
        assert session_id in client.get("/sessions").json()["sessions"]

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope/stage").status_code == 404
        assert client.get("/sessions/nope/events").status_code == 404

    def test_bad_config_400(self, client):
        response = client.post("/sessions", json={"context_budget_seconds": -5})
        assert response.status_code == 400


class TestWebSocketStream:
    def test_text_intervals_drive_scripted_suggestions(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "What does Augury do?", "start_seconds": 0.0})
            events = []
            while True:
                frame = ws.receive_json()
                events.append(frame)
                if frame["type"] == "timing":
                    break
            suggestions = [e for e in events if e["type"] == "suggestion"]
            assert len(suggestions) == 1
            assert suggestions[0]["name"] == "Augury"
            ws.send_json({"type": "text_interval", "text": "Nemura enters", "start_seconds": 10.0})
            second = []
            while True:
                frame = ws.receive_json()
                second.append(frame)
                if frame["type"] == "timing":
                    break
            stage_frames = [e for e in second if e["type"] == "suggestion"]
            assert stage_frames and stage_frames[0]["npc"] == "Nemura"

    def test_every_frame_is_a_valid_session_event(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "hello", "start_seconds": 0.0})
            while True:
                frame = ws.receive_json()
                event = SessionEvent.from_dict(frame)  # raises on schema violation
                if event.type.value == "timing":
                    break

    def test_malformed_frame_keeps_connection_open(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "mystery"})
            error = ws.receive_json()
            assert error["type"] == "error" and error["code"] == 400
            ws.send_json({"type": "text_interval", "text": "still alive", "start_seconds": 0.0})
            frame = ws.receive_json()
            assert frame["type"] == "interval_received"

    def test_out_of_order_interval_409(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "first", "start_seconds": 50.0})
            while ws.receive_json()["type"] != "timing":
                pass
            ws.send_json({"type": "text_interval", "text": "backwards", "start_seconds": 10.0})
            error = ws.receive_json()
            assert error["type"] == "error" and error["code"] == 409

    def test_audio_frame_duration_derived(self, client):
        session_id = _scripted_session(client)
        audio = bytes(32000)  # one second of pcm16 @ 16 kHz
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json(
                {
                    "type": "audio",
                    "data": base64.b64encode(audio).decode(),
                    "start_seconds": 0.0,
                    "transcript": "hi",
                }
            )
            frame = ws.receive_json()
            assert frame["type"] == "interval_received"
            assert frame["duration_seconds"] == 1.0
            assert frame["has_audio"] is True

    def test_bad_base64_audio_error_frame(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "audio", "data": "%%%", "start_seconds": 0.0})
            error = ws.receive_json()
            assert error["code"] == 400

    def test_observer_resume_with_since(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "What does Augury do?", "start_seconds": 0.0})
            seen = []
            while True:
                frame = ws.receive_json()
                seen.append(frame)
                if frame["type"] == "timing":
                    break
        cutoff = seen[2]["seq"]
        with client.websocket_connect(f"/sessions/{session_id}/stream?since={cutoff}") as observer:
            replayed = [observer.receive_json() for _ in range(len(seen) - 3)]
            assert [f["seq"] for f in replayed] == [f["seq"] for f in seen[3:]]


class TestEventsEndpoint:
    def test_paging_and_since(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "What does Augury do?", "start_seconds": 0.0})
            while ws.receive_json()["type"] != "timing":
                pass
        page = client.get(f"/sessions/{session_id}/events").json()
        assert page["events"]
        seqs = [e["seq"] for e in page["events"]]
        assert seqs == sorted(seqs)
        last = page["next_since"]
        empty = client.get(f"/sessions/{session_id}/events", params={"since": last}).json()
        assert empty["events"] == []
        assert empty["next_since"] == last

    def test_stage_endpoint_reflects_events(self, client):
        session_id = _scripted_session(client)
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            for i, text in enumerate(["Augury?", "Nemura enters"]):
                ws.send_json({"type": "text_interval", "text": text, "start_seconds": i * 10.0})
                while ws.receive_json()["type"] != "timing":
                    pass
        stage = client.get(f"/sessions/{session_id}/stage").json()
        assert stage["on_stage"] == ["Nemura"]
        assert {npc["name"] for npc in stage["configured"]} >= {"Nemura", "Akita"}


class TestCorpusEndpoint:
    def test_search_passthrough(self, client):
        hits = client.get("/corpus/entities", params={"type": "spell", "q": "Augury"}).json()
        assert [e["name"] for e in hits["entities"]] == ["Augury"]

    def test_fuzzy_and_bad_type(self, client):
        hits = client.get("/corpus/entities", params={"type": "spell", "q": "Agury"}).json()
        assert hits["entities"][0]["name"] == "Augury"
        assert client.get("/corpus/entities", params={"type": "weapon", "q": "x"}).status_code == 400


class TestFeedbackAndAnnotations:
    def _run_interval(self, client, session_id):
        with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
            ws.send_json({"type": "text_interval", "text": "What does Augury do?", "start_seconds": 0.0})
            frames = []
            while True:
                frame = ws.receive_json()
                frames.append(frame)
                if frame["type"] == "timing":
                    break
        return frames

    def test_feedback_persisted_durably(self, corpus, tmp_path):
        app = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
        with TestClient(app) as client:
            session_id = _scripted_session(client)
            frames = self._run_interval(client, session_id)
            suggestion_id = next(f["suggestion_id"] for f in frames if f["type"] == "suggestion")
            response = client.post(f"/suggestions/{suggestion_id}/feedback", json={"action": "dismiss"})
            assert response.status_code == 200
        feedback_path = tmp_path / session_id / "feedback.jsonl"
        record = json.loads(feedback_path.read_text(encoding="utf-8").splitlines()[0])
        assert record["action"] == "dismiss"
        assert record["suggestion_id"] == suggestion_id

    def test_feedback_validates_action_and_suggestion(self, client):
        session_id = _scripted_session(client)
        frames = self._run_interval(client, session_id)
        suggestion_id = next(f["suggestion_id"] for f in frames if f["type"] == "suggestion")
        assert client.post(f"/suggestions/{suggestion_id}/feedback", json={"action": "shrug"}).status_code == 400
        assert client.post(f"/suggestions/{session_id}:999/feedback", json={"action": "accept"}).status_code == 404

    def test_annotations_round_trip_and_survive_restart(self, corpus, tmp_path):
        app = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
        with TestClient(app) as client:
            session_id = _scripted_session(client)
            frames = self._run_interval(client, session_id)
            suggestion_id = next(f["suggestion_id"] for f in frames if f["type"] == "suggestion")
            body = {
                "session_id": session_id,
                "suggestion_id": suggestion_id,
                "annotator_id": "ann1",
                "score": 2,
                "sublabels": ["explicit-entity"],
            }
            assert client.post("/annotations", json=body).status_code == 201
            bad = {**body, "score": 2, "sublabels": ["improper-match"]}
            assert client.post("/annotations", json=bad).status_code == 400

        fresh = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
        with TestClient(fresh) as client2:
            records = client2.get(f"/sessions/{session_id}/annotations").json()["annotations"]
            assert len(records) == 1
            assert records[0]["suggestion_id"] == suggestion_id
            filtered = client2.get(
                f"/sessions/{session_id}/annotations", params={"annotator": "nobody"}
            ).json()["annotations"]
            assert filtered == []

    def test_annotation_schema_endpoint(self, client):
        schema = client.get("/annotations/schema").json()
        by_score = {entry["score"]: entry for entry in schema["scores"]}
        assert set(by_score) == {2, 1, -1, -2}
        assert by_score[-2]["sublabels"] == [
            "improper-match",
            "incorrect-entity",
            "npc-never-appears",
            "npc-action-reversed",
            "not-dm-narration",
            "no-aid-needed",
        ]


class TestRecoveryAcrossRestart:
    def test_stage_recovered_from_event_log(self, corpus, tmp_path):
        first = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
        with TestClient(first) as client:
            session_id = _scripted_session(client)
            with client.websocket_connect(f"/sessions/{session_id}/stream") as ws:
                for i, text in enumerate(["Augury?", "Nemura enters"]):
                    ws.send_json({"type": "text_interval", "text": text, "start_seconds": i * 10.0})
                    while ws.receive_json()["type"] != "timing":
                        pass
            expected = client.get(f"/sessions/{session_id}/stage").json()

        fresh = create_app(corpus, tmp_path, default_backend={"type": "scripted"})
        with TestClient(fresh) as client2:
            assert client2.get(f"/sessions/{session_id}/stage").json() == expected
            events = client2.get(f"/sessions/{session_id}/events").json()["events"]
            assert events
