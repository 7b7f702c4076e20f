"""Generate the frontend test fixtures by driving the real service.

The committed files under frontend/tests/fixtures are byte-stable: session
ids are pinned and wall clocks zeroed. test_secondary_acceptance regenerates
them in memory and fails if the committed copies have drifted.

Run `python3 -m tests.make_fixtures` (or `python3 tests/make_fixtures.py`)
from the repo root to rewrite the files after an intentional change.
"""

from __future__ import annotations

import json
import tempfile
from importlib import resources
from pathlib import Path

from fastapi.testclient import TestClient

from overhear.backends import ScriptedBackend
from overhear.service import create_app

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"
DEMO = resources.files("overhear.data.demo")

SESSION_ID = "nemura-demo"

ANNOTATION_PLAN = [
    # (suggestion index in the demo stream, annotator, score, sublabels)
    (0, "player1", 2, ["explicit-entity"]),
    (0, "player2", 1, ["explicit-entity"]),
    (1, "player1", 1, []),
    (1, "player2", -1, ["relevant-but-unnecessary"]),
    (2, "player1", 2, ["explicit-entity"]),
    (3, "player1", -2, ["not-dm-narration"]),
    (3, "player2", -1, ["slightly-wrong-bad"]),
    (4, "player1", 2, []),
    (4, "player2", 2, ["explicit-aid"]),
    (5, "player1", 1, ["explicit-entity"]),
]

# With mean-score aggregation: index 1 ties at 0, index 3 is negative,
# the rest are gold. No two golds are equivalent within the window.
EXPECTED_GOLD_INDEXES = [0, 2, 4, 5]
EXPECTED_TIE_INDEXES = [1]


def _zero_wall_clock(frame: dict) -> dict:
    out = dict(frame)
    out["wall_clock_ms"] = 0
    return out


def build_session_fixture() -> dict:
    intervals = [
        json.loads(line)
        for line in DEMO.joinpath("demo_intervals.jsonl").read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    with tempfile.TemporaryDirectory() as data_dir:
        app = create_app(
            str(DEMO.joinpath("sample_corpus.json")), data_dir, default_backend={"type": "scripted"}
        )
        with TestClient(app) as client:
            created = client.post(
                "/sessions", json={"session_id": SESSION_ID, "variant": {"modality": "text"}}
            )
            assert created.status_code == 201
            service = client.app.state.service
            service.sessions[SESSION_ID].backend = ScriptedBackend.load(
                str(DEMO.joinpath("demo_script.jsonl"))
            )
            events: list[dict] = []
            checkpoints: list[dict] = []
            with client.websocket_connect(f"/sessions/{SESSION_ID}/stream") as ws:
                for record in intervals:
                    ws.send_json(
                        {
                            "type": "text_interval",
                            "text": record["transcript"],
                            "start_seconds": record["start_seconds"],
                        }
                    )
                    while True:
                        frame = ws.receive_json()
                        events.append(_zero_wall_clock(frame))
                        if frame["type"] == "timing":
                            break
                    stage = client.get(f"/sessions/{SESSION_ID}/stage").json()
                    checkpoints.append(
                        {"after_seq": events[-1]["seq"], "on_stage": stage["on_stage"]}
                    )
            schema = client.get("/annotations/schema").json()
    return {
        "session_id": SESSION_ID,
        "events": events,
        "checkpoints": checkpoints,
        "schema": schema,
    }


def build_annotation_fixture(session_fixture: dict) -> dict:
    suggestions = [e for e in session_fixture["events"] if e["type"] == "suggestion"]
    assert len(suggestions) == 6
    annotations = [
        {
            "session_id": SESSION_ID,
            "suggestion_id": suggestions[index]["suggestion_id"],
            "annotator_id": annotator,
            "score": score,
            "sublabels": sublabels,
        }
        for index, annotator, score, sublabels in ANNOTATION_PLAN
    ]
    return {
        "session_id": SESSION_ID,
        "suggestions": suggestions,
        "annotations": annotations,
        "expected_gold_ids": [suggestions[i]["suggestion_id"] for i in EXPECTED_GOLD_INDEXES],
        "expected_tie_ids": [suggestions[i]["suggestion_id"] for i in EXPECTED_TIE_INDEXES],
    }


def build_all() -> dict[str, dict]:
    session = build_session_fixture()
    return {
        "nemura_session.json": {
            "session_id": session["session_id"],
            "events": session["events"],
            "checkpoints": session["checkpoints"],
        },
        "annotation_schema.json": session["schema"],
        "annotation_roundtrip.json": build_annotation_fixture(session),
    }


def write_fixtures() -> None:
    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    for name, payload in build_all().items():
        path = FIXTURES_DIR / name
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {path}")


if __name__ == "__main__":
    write_fixtures()
