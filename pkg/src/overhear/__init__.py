"""Overhearing-agent engine: listen to a multi-human conversation, drive a
tool-calling model in the background, and evaluate the suggestions it makes.
"""

from .core import (
    EntityType,
    EventType,
    Interval,
    MatchConfig,
    SessionEvent,
    StageAction,
    Suggestion,
    SuggestionKind,
    validate_interval,
)
from .engine import SessionConfig, SessionState, new_session, on_interval, relative_speed
from .evaluation import (
    Annotation,
    EvaluationReport,
    GoldSet,
    aggregate_annotations,
    compute_report,
    equivalent,
    krippendorff_alpha,
    match_suggestions,
)
from .gamedata import Corpus, GameEntity, NpcProfile, load_corpus, normalized_similarity, search_entity
from .protocol import Modality, ModelTurn, PromptVariant, build_few_shot, build_system_prompt, parse_turn, render_turn
from .stage import StageState, ToolCall, ToolResult, dispatch, initial_stage, tool_schemas

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "Corpus",
    "EntityType",
    "EvaluationReport",
    "EventType",
    "GameEntity",
    "GoldSet",
    "Interval",
    "MatchConfig",
    "Modality",
    "ModelTurn",
    "NpcProfile",
    "PromptVariant",
    "SessionConfig",
    "SessionEvent",
    "SessionState",
    "StageAction",
    "StageState",
    "Suggestion",
    "SuggestionKind",
    "ToolCall",
    "ToolResult",
    "aggregate_annotations",
    "build_few_shot",
    "build_system_prompt",
    "compute_report",
    "dispatch",
    "equivalent",
    "initial_stage",
    "krippendorff_alpha",
    "load_corpus",
    "match_suggestions",
    "new_session",
    "normalized_similarity",
    "on_interval",
    "parse_turn",
    "relative_speed",
    "render_turn",
    "search_entity",
    "tool_schemas",
    "validate_interval",
]
