"""Operator entry points: serve, replay, baseline, eval, aggregate,
export-grammar, export-timeline.

Every flag has a config-file equivalent: pass --config with a JSON object
keyed by option name; explicit flags override the file.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .backends import ScriptedBackend
from .baseline import baseline_suggest
from .core import Interval, MatchConfig, validate_interval
from .engine import SessionConfig, new_session, on_interval, relative_speed
from .evaluation import (
    aggregate_annotations,
    compute_report,
    export_timeline,
    load_annotations,
    load_gold,
    load_suggestions,
    load_suggestions_with_ids,
    write_timeline_csv,
)
from .gamedata import load_corpus
from .grammar import emit_action_grammar
from .persistence import suggestion_records_from_events
from .protocol import Modality, PromptVariant
from .service import DATA_DIR_ENV, PORT_ENV, create_app


def _apply_config(ctx: click.Context, param: click.Parameter, value: str | None):
    """Load defaults from a JSON config file; explicit flags still win."""
    if value is None:
        return None
    overrides = json.loads(Path(value).read_text(encoding="utf-8"))
    if not isinstance(overrides, dict):
        raise click.BadParameter("config file must hold a JSON object")
    ctx.default_map = {**(ctx.default_map or {}), **overrides}
    return value


def _config_option():
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_apply_config,
        is_eager=True,
        expose_value=False,
        help="JSON file with option defaults (flags override).",
    )


def _variant(modality: str, transcribe: bool, reasoning: bool) -> PromptVariant:
    return PromptVariant(
        modality=Modality(modality), transcribe_first=transcribe, reasoning=reasoning
    )


def _load_intervals(path: str) -> list[Interval]:
    intervals = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            intervals.append(validate_interval(json.loads(line)))
    return intervals


@click.group()
def main() -> None:
    """Overhearing-agent engine and evaluation pipeline."""


@main.command()
@_config_option()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--data-dir", default=lambda: os.environ.get(DATA_DIR_ENV, "data"), show_default="data")
@click.option("--port", default=lambda: int(os.environ.get(PORT_ENV, "8000")), show_default="8000")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--backend-script", type=click.Path(exists=True), help="Scripted backend JSONL.")
@click.option("--backend-url", help="Chat-completions base URL for a live backend.")
@click.option("--backend-model", default="default", show_default=True)
@click.option("--native-tool-calls", is_flag=True, default=False)
@click.option("--static-dir", type=click.Path(exists=True, file_okay=False),
              help="Serve the browser console from this directory (e.g. frontend/).")
def serve(corpus_path, data_dir, port, host, backend_script, backend_url, backend_model,
          native_tool_calls, static_dir):
    """Run the HTTP + WebSocket API."""
    import uvicorn

    if backend_url:
        default_backend = {
            "type": "http",
            "base_url": backend_url,
            "model": backend_model,
            "native_tool_calls": native_tool_calls,
        }
    elif backend_script:
        default_backend = {"type": "scripted", "script": backend_script}
    else:
        default_backend = {"type": "scripted"}
    app = create_app(corpus_path, data_dir, default_backend=default_backend, static_dir=static_dir)
    uvicorn.run(app, host=host, port=int(port))


@main.command()
@_config_option()
@click.option("--intervals", "intervals_path", required=True, type=click.Path(exists=True))
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--session-id", default="replay", show_default=True)
@click.option("--modality", type=click.Choice(["audio", "text"]), default="text", show_default=True)
@click.option("--transcribe/--no-transcribe", "transcribe", default=False)
@click.option("--reasoning/--no-reasoning", "reasoning", default=True)
@click.option("--players", multiple=True, help="Player character names (repeatable).")
@click.option("--seed", default=0, show_default=True)
def replay(intervals_path, script_path, corpus_path, out_dir, session_id, modality, transcribe, reasoning, players, seed):
    """Run a full session offline from an interval file and a scripted backend."""
    corpus = load_corpus(corpus_path)
    backend = ScriptedBackend.load(script_path)
    config = SessionConfig(
        variant=_variant(modality, transcribe, reasoning),
        player_characters=tuple(players),
        seed=seed,
    )
    state = new_session(session_id, config, corpus)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    events_path = out / "events.jsonl"
    suggestions_path = out / "suggestions.jsonl"
    all_events = []
    with events_path.open("w", encoding="utf-8") as fh:
        for interval in _load_intervals(intervals_path):
            state, events = on_interval(state, interval, backend)
            all_events.extend(events)
            for event in events:
                fh.write(json.dumps(event.to_dict()) + "\n")
    with suggestions_path.open("w", encoding="utf-8") as fh:
        for record in suggestion_records_from_events(all_events):
            fh.write(json.dumps(record) + "\n")
    click.echo(f"wrote {events_path} and {suggestions_path}")


@main.command("baseline")
@_config_option()
@click.option("--transcript", "transcript_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def baseline_cmd(transcript_path, corpus_path, out_path):
    """Run the naive name-matching baseline over a transcript JSONL."""
    corpus = load_corpus(corpus_path)
    intervals = _load_intervals(transcript_path)
    suggestions = baseline_suggest(intervals, corpus)
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for i, suggestion in enumerate(suggestions):
            record = {"suggestion_id": f"baseline:{i}", **suggestion.to_dict()}
            fh.write(json.dumps(record) + "\n")
    click.echo(f"wrote {len(suggestions)} suggestions to {out_path}")


@main.command("eval")
@_config_option()
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--window", default=300.0, show_default=True, help="Match window in seconds.")
@click.option("--sim-threshold", default=0.8, show_default=True, help="Speech similarity threshold.")
@click.option("--timing", "timing_path", type=click.Path(exists=True), help="Event log for relative speed.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Report JSON path (default stdout).")
@click.option("--gold-provenance", default="annotation", show_default=True)
def eval_cmd(pred_path, gold_path, window, sim_threshold, timing_path, out_path, gold_provenance):
    """Score predictions against a gold set."""
    cfg = MatchConfig(window_seconds=window, speech_similarity_threshold=sim_threshold)
    pred = sorted(load_suggestions(pred_path), key=lambda s: s.at_seconds)
    gold = load_gold(gold_path, provenance=gold_provenance, cfg=cfg)
    speed = None
    if timing_path:
        from .core import SessionEvent

        events = []
        for line in Path(timing_path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(SessionEvent.from_dict(json.loads(line)))
        speed = relative_speed(events)
    report = compute_report(pred, gold, cfg, timing_relative_speed=speed)
    text = json.dumps(report.to_dict(), indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)


@main.command()
@_config_option()
@click.option("--annotations", "annotations_path", required=True, type=click.Path(exists=True))
@click.option("--suggestions", "suggestions_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--ties-out", "ties_path", type=click.Path(dir_okay=False))
@click.option("--window", default=300.0, show_default=True)
@click.option("--sim-threshold", default=0.8, show_default=True)
def aggregate(annotations_path, suggestions_path, out_path, ties_path, window, sim_threshold):
    """Aggregate annotations into a deduplicated gold set plus unresolved ties."""
    cfg = MatchConfig(window_seconds=window, speech_similarity_threshold=sim_threshold)
    annotations = load_annotations(annotations_path)
    suggestions = load_suggestions_with_ids(suggestions_path)
    result = aggregate_annotations(annotations, suggestions, cfg)
    with Path(out_path).open("w", encoding="utf-8") as fh:
        for suggestion in result.gold.sorted():
            fh.write(json.dumps(suggestion.to_dict()) + "\n")
    click.echo(f"wrote {len(result.gold.suggestions)} gold suggestions to {out_path}")
    if ties_path:
        with Path(ties_path).open("w", encoding="utf-8") as fh:
            for suggestion_id in result.ties:
                record = {"suggestion_id": suggestion_id, **suggestions[suggestion_id].to_dict()}
                fh.write(json.dumps(record) + "\n")
        click.echo(f"wrote {len(result.ties)} ties to {ties_path}")
    elif result.ties:
        click.echo(f"{len(result.ties)} tied suggestions need manual resolution", err=True)


@main.command("export-grammar")
@_config_option()
@click.option("--modality", type=click.Choice(["audio", "text"]), default="audio", show_default=True)
@click.option("--transcribe/--no-transcribe", "transcribe", default=False)
@click.option("--reasoning/--no-reasoning", "reasoning", default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Default stdout.")
def export_grammar(modality, transcribe, reasoning, out_path):
    """Emit the action grammar for constrained decoding."""
    text = emit_action_grammar(variant=_variant(modality, transcribe, reasoning))
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        sys.stdout.write(text)


@main.command("export-timeline")
@_config_option()
@click.option("--run", "runs", multiple=True, help="name=suggestions.jsonl (repeatable).")
@click.option("--gold", "gold_path", type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def export_timeline_cmd(runs, gold_path, out_path):
    """Write plot-ready timeline rows for one or more runs plus gold."""
    run_map = {}
    for spec in runs:
        name, _, path = spec.partition("=")
        if not path:
            raise click.BadParameter(f"--run expects name=path, got {spec!r}")
        run_map[name] = load_suggestions(path)
    gold = load_suggestions(gold_path) if gold_path else None
    rows = export_timeline(run_map, gold)
    write_timeline_csv(rows, out_path)
    click.echo(f"wrote {len(rows)} rows to {out_path}")


if __name__ == "__main__":
    main()
