"""Deterministic evaluation pipeline: gold-set construction from annotations,
temporal suggestion matching, per-task precision/recall/F1, inter-annotator
agreement, timeline export.

Matching is many-to-one: every prediction is judged independently against
the gold set (a prediction is correct if any gold suggestion is equivalent
and within the time window), and a gold suggestion is covered if any
prediction matches it. This affects absolute scores relative to one-to-one
assignment schemes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .core import (
    MatchConfig,
    OverhearError,
    Suggestion,
    SuggestionKind,
    ValidationError,
)
from .gamedata import normalized_similarity

TASK_GAME_DATA = "game_data_retrieval"
TASK_STAGE_DIRECTOR = "npc_stage_director"
TASK_GENERATE_NPCS = "generate_npcs"

TASK_OF_KIND = {
    SuggestionKind.GAME_DATA: TASK_GAME_DATA,
    SuggestionKind.STAGE_EVENT: TASK_STAGE_DIRECTOR,
    SuggestionKind.NPC_SPEECH: TASK_STAGE_DIRECTOR,
    SuggestionKind.IMPROVISED_NPC: TASK_GENERATE_NPCS,
}

TASKS = (TASK_GAME_DATA, TASK_STAGE_DIRECTOR, TASK_GENERATE_NPCS)

# Rating scale and the sublabel catalog keyed by score.
SCORES = (2, 1, -1, -2)

SCORE_LABELS = {
    2: {"key": "appropriate", "label": "\U0001F44D \U0001F44D Helpful in context"},
    1: {"key": "mostly-appropriate", "label": "\U0001F44D More helpful than not in context, but some errors"},
    -1: {
        "key": "mostly-inappropriate",
        "label": "\U0001F44E Could be helpful in context, but more unhelpful than helpful; major errors",
    },
    -2: {"key": "inappropriate", "label": "\U0001F44E \U0001F44E Not helpful in context, or an error"},
}

SUBLABELS = {
    2: ("explicit-entity", "explicit-aid"),
    1: ("explicit-entity", "explicit-aid", "slightly-wrong"),
    -1: ("improper-match", "relevant-but-unnecessary", "slightly-wrong-bad"),
    -2: (
        "improper-match",
        "incorrect-entity",
        "npc-never-appears",
        "npc-action-reversed",
        "not-dm-narration",
        "no-aid-needed",
    ),
}


class UnsortedInput(OverhearError):
    """Suggestion lists must be sorted by at_seconds."""


class InsufficientOverlap(OverhearError):
    """No item carries ratings from two or more annotators."""


@dataclass(frozen=True)
class Annotation:
    suggestion_id: str
    annotator_id: str
    score: int
    sublabels: tuple[str, ...] = ()
    comment: str | None = None

    def __post_init__(self) -> None:
        if self.score not in SCORES:
            raise ValidationError(f"score must be one of {SCORES}, got {self.score}")
        allowed = set(SUBLABELS[self.score])
        bad = [s for s in self.sublabels if s not in allowed]
        if bad:
            raise ValidationError(f"sublabels {bad} are not valid for score {self.score:+d}")

    def to_dict(self) -> dict:
        rec: dict = {
            "suggestion_id": self.suggestion_id,
            "annotator_id": self.annotator_id,
            "score": self.score,
            "sublabels": list(self.sublabels),
        }
        if self.comment is not None:
            rec["comment"] = self.comment
        return rec

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Annotation":
        try:
            return cls(
                suggestion_id=raw["suggestion_id"],
                annotator_id=raw["annotator_id"],
                score=int(raw["score"]),
                sublabels=tuple(raw.get("sublabels", ())),
                comment=raw.get("comment"),
            )
        except KeyError as exc:
            raise ValidationError(f"missing annotation field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class GoldSet:
    """Deduplicated ground-truth suggestions.

    No two members may be equivalent and within the match window of each
    other; violations are rejected at construction.
    """

    suggestions: tuple[Suggestion, ...]
    provenance: str = "annotation"
    config: MatchConfig = field(default_factory=MatchConfig)

    def __post_init__(self) -> None:
        ordered = sorted(self.suggestions, key=lambda s: s.at_seconds)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                if b.at_seconds - a.at_seconds > self.config.window_seconds:
                    break
                if equivalent(a, b, self.config):
                    raise ValidationError(
                        f"gold suggestions at {a.at_seconds}s and {b.at_seconds}s are "
                        "equivalent within the match window"
                    )

    def sorted(self) -> list[Suggestion]:
        return sorted(self.suggestions, key=lambda s: s.at_seconds)


def equivalent(a: Suggestion, b: Suggestion, cfg: MatchConfig | None = None) -> bool:
    """Content equivalence, ignoring timestamps.

    Speech equivalence is threshold-exclusive: similarity must be strictly
    greater than the configured threshold.
    """
    cfg = cfg or MatchConfig()
    if a.kind is not b.kind:
        return False
    pa, pb = a.payload, b.payload
    if a.kind is SuggestionKind.GAME_DATA:
        return pa.entity_type is pb.entity_type and pa.name.lower() == pb.name.lower()
    if a.kind is SuggestionKind.STAGE_EVENT:
        return pa.action is pb.action and pa.npc.lower() == pb.npc.lower()
    if a.kind is SuggestionKind.NPC_SPEECH:
        if pa.npc.lower() != pb.npc.lower():
            return False
        return normalized_similarity(pa.speech, pb.speech) > cfg.speech_similarity_threshold
    return True  # improvised NPCs match regardless of parameters


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int], ...]


def _check_sorted(suggestions: Sequence[Suggestion], label: str) -> None:
    for earlier, later in zip(suggestions, suggestions[1:]):
        if later.at_seconds < earlier.at_seconds:
            raise UnsortedInput(f"{label} suggestions are not sorted by at_seconds")


def match_suggestions(
    pred: Sequence[Suggestion], gold: GoldSet | Sequence[Suggestion], cfg: MatchConfig | None = None
) -> MatchCounts:
    """Count true/false positives and false negatives under the time window.

    tp counts predictions with at least one equivalent gold suggestion within
    window_seconds (inclusive); fn counts gold suggestions no prediction
    matches. pairs holds every qualifying (pred_index, gold_index).
    """
    cfg = cfg or MatchConfig()
    gold_list = gold.sorted() if isinstance(gold, GoldSet) else list(gold)
    _check_sorted(pred, "prediction")
    _check_sorted(gold_list, "gold")
    pairs: list[tuple[int, int]] = []
    matched_pred: set[int] = set()
    matched_gold: set[int] = set()
    start = 0
    for i, p in enumerate(pred):
        while start < len(gold_list) and gold_list[start].at_seconds < p.at_seconds - cfg.window_seconds:
            start += 1
        for j in range(start, len(gold_list)):
            g = gold_list[j]
            if g.at_seconds > p.at_seconds + cfg.window_seconds:
                break
            if equivalent(p, g, cfg):
                pairs.append((i, j))
                matched_pred.add(i)
                matched_gold.add(j)
    return MatchCounts(
        tp=len(matched_pred),
        fp=len(pred) - len(matched_pred),
        fn=len(gold_list) - len(matched_gold),
        pairs=tuple(pairs),
    )


def _metrics(counts: MatchCounts) -> dict:
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"tp": tp, "fp": fp, "fn": fn, "precision": precision, "recall": recall, "f1": f1}


@dataclass(frozen=True)
class EvaluationReport:
    per_task: Mapping[str, Mapping[str, float]]
    aggregate: Mapping[str, float]
    config: MatchConfig
    relative_speed: float | None = None

    def to_dict(self) -> dict:
        return {
            "per_task": {task: dict(metrics) for task, metrics in self.per_task.items()},
            "aggregate": dict(self.aggregate),
            "relative_speed": self.relative_speed,
            "config": {
                "window_seconds": self.config.window_seconds,
                "speech_similarity_threshold": self.config.speech_similarity_threshold,
            },
            "conventions": {
                "matching": "many_to_one",
                "precision_with_no_predictions": 1.0,
                "recall_with_empty_gold": 1.0,
            },
        }


def compute_report(
    pred: Sequence[Suggestion],
    gold: GoldSet | Sequence[Suggestion],
    cfg: MatchConfig | None = None,
    timing_relative_speed: float | None = None,
) -> EvaluationReport:
    """Per-task and pooled-aggregate metrics.

    Tasks follow the suggestion kinds, with stage events and NPC speech
    pooled under the stage-director task.
    """
    cfg = cfg or MatchConfig()
    gold_list = gold.sorted() if isinstance(gold, GoldSet) else list(gold)
    per_task = {}
    for task in TASKS:
        task_pred = [s for s in pred if TASK_OF_KIND[s.kind] == task]
        task_gold = [s for s in gold_list if TASK_OF_KIND[s.kind] == task]
        per_task[task] = _metrics(match_suggestions(task_pred, task_gold, cfg))
    aggregate = _metrics(match_suggestions(list(pred), gold_list, cfg))
    return EvaluationReport(
        per_task=per_task, aggregate=aggregate, config=cfg, relative_speed=timing_relative_speed
    )


@dataclass(frozen=True)
class AggregationResult:
    gold: GoldSet
    ties: tuple[str, ...]


def aggregate_annotations(
    annotations: Sequence[Annotation],
    suggestions: Mapping[str, Suggestion],
    cfg: MatchConfig | None = None,
    provenance: str = "annotation",
) -> AggregationResult:
    """Mean-score aggregation into a gold set.

    Positive mean -> gold candidate; exactly zero -> tie, returned for
    manual resolution; negative -> dropped. Candidates equivalent within
    the window are deduplicated keeping the earliest.
    """
    cfg = cfg or MatchConfig()
    by_suggestion: dict[str, list[int]] = {}
    for annotation in annotations:
        if annotation.suggestion_id not in suggestions:
            raise ValidationError(f"annotation references unknown suggestion {annotation.suggestion_id!r}")
        by_suggestion.setdefault(annotation.suggestion_id, []).append(annotation.score)
    unannotated = sorted(set(suggestions) - set(by_suggestion))
    if unannotated:
        raise ValidationError(f"suggestions without annotations: {unannotated}")
    candidates: list[tuple[str, Suggestion]] = []
    ties: list[str] = []
    for suggestion_id, scores in by_suggestion.items():
        mean = sum(scores) / len(scores)
        if mean > 0:
            candidates.append((suggestion_id, suggestions[suggestion_id]))
        elif mean == 0:
            ties.append(suggestion_id)
    candidates.sort(key=lambda item: (item[1].at_seconds, item[0]))
    kept: list[Suggestion] = []
    for _, suggestion in candidates:
        duplicate = any(
            abs(suggestion.at_seconds - existing.at_seconds) <= cfg.window_seconds
            and equivalent(suggestion, existing, cfg)
            for existing in kept
        )
        if not duplicate:
            kept.append(suggestion)
    gold = GoldSet(suggestions=tuple(kept), provenance=provenance, config=cfg)
    return AggregationResult(gold=gold, ties=tuple(ties))


def krippendorff_alpha(annotations: Sequence[Annotation]) -> float:
    """Krippendorff's alpha with the interval distance metric over the
    rating scale, in the standard coincidence-matrix formulation.

    Items are suggestion ids; only items with two or more ratings are
    pairable. Returns 1.0 under zero disagreement.
    """
    units: dict[str, list[float]] = {}
    for annotation in annotations:
        units.setdefault(annotation.suggestion_id, []).append(float(annotation.score))
    pairable = {uid: values for uid, values in units.items() if len(values) >= 2}
    if not pairable:
        raise InsufficientOverlap("no item is rated by two or more annotators")
    n = sum(len(values) for values in pairable.values())

    coincidence: dict[tuple[float, float], float] = {}
    for values in pairable.values():
        m = len(values)
        for i, c in enumerate(values):
            for j, k in enumerate(values):
                if i != j:
                    coincidence[(c, k)] = coincidence.get((c, k), 0.0) + 1.0 / (m - 1)

    def delta(c: float, k: float) -> float:
        return (c - k) ** 2

    observed = sum(weight * delta(c, k) for (c, k), weight in coincidence.items()) / n
    marginals: dict[float, float] = {}
    for (c, _k), weight in coincidence.items():
        marginals[c] = marginals.get(c, 0.0) + weight
    expected = sum(
        nc * nk * delta(c, k) for c, nc in marginals.items() for k, nk in marginals.items()
    ) / (n * (n - 1))
    if expected == 0:
        return 1.0
    return 1.0 - observed / expected


def export_timeline(
    runs: Mapping[str, Sequence[Suggestion]], gold: GoldSet | Sequence[Suggestion] | None = None
) -> list[dict]:
    """Plot-ready rows (run, at_seconds, kind) where kind is the task name."""
    rows = []
    items: list[tuple[str, Sequence[Suggestion]]] = list(runs.items())
    if gold is not None:
        gold_list = gold.sorted() if isinstance(gold, GoldSet) else list(gold)
        items.append(("gold", gold_list))
    for run_name, suggestions in items:
        for suggestion in suggestions:
            rows.append(
                {
                    "run": run_name,
                    "at_seconds": suggestion.at_seconds,
                    "kind": TASK_OF_KIND[suggestion.kind],
                }
            )
    return rows


def write_timeline_csv(rows: Sequence[Mapping], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["run", "at_seconds", "kind"])
        writer.writeheader()
        writer.writerows(rows)


def load_suggestions(path: str | Path) -> list[Suggestion]:
    """Read a suggestions JSONL file (extra fields such as ids are ignored)."""
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Suggestion.from_dict(json.loads(line)))
    return out


def load_suggestions_with_ids(path: str | Path) -> dict[str, Suggestion]:
    """Read a suggestions JSONL file keyed by suggestion_id (row index when absent)."""
    out: dict[str, Suggestion] = {}
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        rec = json.loads(line)
        out[rec.get("suggestion_id", f"row-{i}")] = Suggestion.from_dict(rec)
    return out


def load_gold(path: str | Path, provenance: str, cfg: MatchConfig | None = None) -> GoldSet:
    return GoldSet(
        suggestions=tuple(load_suggestions(path)),
        provenance=provenance,
        config=cfg or MatchConfig(),
    )


def load_annotations(path: str | Path) -> list[Annotation]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Annotation.from_dict(json.loads(line)))
    return out
