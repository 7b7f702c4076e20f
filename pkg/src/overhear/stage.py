"""Tool registry exposed to the model: stage machine, NPC speech,
improvised-NPC generator, and entity search/display.

One stage-management tool takes an action argument and NPC speech is a
separate tool; dispatch is a pure function of (state, corpus, call, seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Any, Mapping

from .core import EntityType, OverhearError, StageAction, Suggestion
from .gamedata import Corpus, NpcProfile, search_entity


class UnknownTool(OverhearError):
    """Tool name is not in the registry."""


class SchemaViolation(OverhearError):
    """Tool arguments do not validate against the tool's schema."""


STAGE_ACTIONS = ("LIST_ALL_NPCS", "LIST_STAGE_NPCS", "ADD_TO_STAGE", "REMOVE_FROM_STAGE")

# The docstring spelling and the few-shot spelling of the add/remove actions
# differ; both are accepted and canonicalized to the few-shot forms.
_STAGE_ACTION_ALIASES = {
    "ADD_NPC_TO_STAGE": "ADD_TO_STAGE",
    "REMOVE_NPC_FROM_STAGE": "REMOVE_FROM_STAGE",
}

TOOL_SCHEMAS: tuple[dict[str, Any], ...] = (
    {
        "name": "npc_stage_event",
        "description": (
            "Manage NPCs on the stage of the virtual tabletop that's representing the game. "
            "You can list all NPCs in the game (LIST_ALL_NPCS), list the NPCs being shown to the "
            "players (\"on stage\", LIST_STAGE_NPCS), add an NPC to the stage (ADD_NPC_TO_STAGE), "
            "or remove an NPC from the stage (REMOVE_NPC_FROM_STAGE). "
            "Call this when a new NPC enters or exits the scene to help the DM visualize the game."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "event_type": {
                    "type": "string",
                    "enum": list(STAGE_ACTIONS),
                    "aliases": dict(_STAGE_ACTION_ALIASES),
                    "description": "The type of stage event to send to the virtual tabletop.",
                },
                "npc": {
                    "type": "string",
                    "description": "The name of the npc who is the subject of the event, if any.",
                },
            },
            "required": ["event_type"],
            "conditionally_required": {
                "npc": {"field": "event_type", "values": ["ADD_TO_STAGE", "REMOVE_FROM_STAGE"]},
            },
        },
    },
    {
        "name": "npc_speech",
        "description": (
            "Show an NPC speaking to the players on the virtual tabletop representing the game. "
            "Call this when the DM describes an NPC speaking to the players. "
            "ONLY call this function with dialog said by the DM, do not come up with your own "
            "dialog. Edits for fluency are allowed."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "npc": {"type": "string", "description": "The name of the npc who is speaking."},
                "speech": {
                    "type": "string",
                    "minLength": 1,
                    "description": "The dialogue being said by this NPC.",
                },
            },
            "required": ["npc", "speech"],
        },
    },
    {
        "name": "suggest_improvised_npc",
        "description": (
            "Generate a new NPC given certain parameters. "
            "Call this when the DM needs assistance thinking of a new NPC that is not already "
            "an existing NPC."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "race": {"type": "string"},
                "background": {"type": "string"},
                "culture": {"type": "string"},
            },
            "required": [],
        },
    },
    {
        "name": "search_dnd",
        "description": (
            "Search the D&D sourcebooks for a certain entity (e.g., spell, creature, class "
            "feature) and show its information to the DM."
        ),
        "parameters": {
            "type": "object",
            "properties": {
                "entity_type": {
                    "type": "string",
                    "enum": [member.value for member in EntityType],
                    "case_insensitive": True,
                    "description": "The type of entity to search for.",
                },
                "name": {
                    "type": "string",
                    "description": (
                        "The name of the entity to search for. If no exact match is found, "
                        "returns the closest matches."
                    ),
                },
            },
            "required": ["entity_type", "name"],
        },
    },
)

_SCHEMAS_BY_NAME = {schema["name"]: schema for schema in TOOL_SCHEMAS}
TOOL_NAMES = tuple(_SCHEMAS_BY_NAME)


def tool_schemas() -> list[dict[str, Any]]:
    """Machine-readable schema document, one object per tool."""
    import copy

    return copy.deepcopy(list(TOOL_SCHEMAS))


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Mapping[str, str]

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": dict(self.arguments)}


def validate_call(name: str, arguments: Mapping[str, Any]) -> ToolCall:
    """Validate raw arguments against the named tool's schema.

    Enum values are canonicalized (stage-action aliases, case-insensitive
    entity types). Raises UnknownTool or SchemaViolation.
    """
    schema = _SCHEMAS_BY_NAME.get(name)
    if schema is None:
        raise UnknownTool(f"unknown tool: {name!r}")
    params = schema["parameters"]
    properties = params["properties"]
    cleaned: dict[str, str] = {}
    for key, value in arguments.items():
        prop = properties.get(key)
        if prop is None:
            raise SchemaViolation(f"{name}: unexpected argument {key!r}")
        if not isinstance(value, str):
            raise SchemaViolation(f"{name}: argument {key!r} must be a string")
        if prop.get("minLength") and len(value) < prop["minLength"]:
            raise SchemaViolation(f"{name}: argument {key!r} must be non-empty")
        enum = prop.get("enum")
        if enum is not None:
            canonical = _canonicalize_enum(prop, value)
            if canonical is None:
                raise SchemaViolation(f"{name}: argument {key!r} has invalid value {value!r}")
            value = canonical
        cleaned[key] = value
    for key in params.get("required", ()):
        if key not in cleaned:
            raise SchemaViolation(f"{name}: missing required argument {key!r}")
    for key, rule in params.get("conditionally_required", {}).items():
        if key not in cleaned and cleaned.get(rule["field"]) in rule["values"]:
            raise SchemaViolation(f"{name}: argument {key!r} is required for this {rule['field']}")
    return ToolCall(name=name, arguments=cleaned)


def _canonicalize_enum(prop: Mapping[str, Any], value: str) -> str | None:
    if prop.get("case_insensitive"):
        folded = value.lower()
        return folded if folded in prop["enum"] else None
    value = prop.get("aliases", {}).get(value, value)
    return value if value in prop["enum"] else None


@dataclass(frozen=True)
class GeneratedNpc:
    name: str
    race: str
    background: str
    culture: str
    trait: str
    quirk: str

    def describe(self) -> str:
        return (
            f"{self.race} {self.background} from {self.culture}; "
            f"{self.trait}; {self.quirk}"
        )

    def to_dict(self) -> dict[str, str]:
        return {
            "name": self.name,
            "race": self.race,
            "background": self.background,
            "culture": self.culture,
            "trait": self.trait,
            "quirk": self.quirk,
        }


NPC_NAMES = (
    "Aldric", "Branwen", "Caspar", "Delia", "Edmund", "Fenna", "Garrick", "Hesper",
    "Isolde", "Jorund", "Kestrel", "Lysandra", "Merek", "Nerissa", "Osric", "Petra",
    "Quill", "Rosalind", "Soren", "Thessaly", "Ulric", "Vesna", "Wendel", "Xanthe",
    "Yorick", "Zinnia", "Ansel", "Brielle", "Corvin", "Dagny", "Elowen", "Fintan",
    "Gwyn", "Hollis", "Imre", "Juniper", "Kolya", "Lark", "Maren", "Niall",
    "Oriana", "Pryce", "Rowan", "Sable", "Tamsin", "Una", "Viggo", "Wren",
)

NPC_RACES = ("human", "elf", "dwarf", "halfling", "gnome", "half-orc", "tiefling", "dragonborn")

NPC_BACKGROUNDS = (
    "soldier", "merchant", "scholar", "farmer", "sailor", "noble",
    "urchin", "acolyte", "entertainer", "guild artisan",
)

NPC_CULTURES = (
    "the northern highlands", "the coastal free cities", "the river delta clans",
    "the old imperial capital", "the desert caravan routes", "the deepwood enclaves",
)

NPC_TRAITS = (
    "speaks in long, winding sentences", "never makes eye contact", "laughs at the wrong moments",
    "quotes proverbs constantly", "keeps meticulous notes", "hums while thinking",
    "collects small shiny objects", "distrusts magic",
)

NPC_QUIRKS = (
    "owes a debt to a rival guild", "is searching for a lost sibling",
    "carries a locket that doesn't open", "knows one true secret about the local lord",
    "is terrified of open water", "gambles away every coin earned",
    "tends a tiny herb garden in a window box", "writes letters that are never sent",
)


def generate_npc(
    seed: int,
    taken_names: frozenset[str] = frozenset(),
    race: str | None = None,
    background: str | None = None,
    culture: str | None = None,
) -> GeneratedNpc:
    """Deterministically sample a profile; constraints pass through verbatim.

    Name collisions against taken_names (case-insensitive) advance through
    the shuffled name table deterministically.
    """
    rng = random.Random(seed)
    order = list(NPC_NAMES)
    rng.shuffle(order)
    name = order[0]
    for candidate in order:
        if candidate.lower() not in taken_names:
            name = candidate
            break
    return GeneratedNpc(
        name=name,
        race=race if race is not None else rng.choice(NPC_RACES),
        background=background if background is not None else rng.choice(NPC_BACKGROUNDS),
        culture=culture if culture is not None else rng.choice(NPC_CULTURES),
        trait=rng.choice(NPC_TRAITS),
        quirk=rng.choice(NPC_QUIRKS),
    )


@dataclass(frozen=True)
class StageState:
    """NPCs currently shown on the tabletop plus the session's NPC universe.

    on_stage is ordered by time of addition and is always a subset of
    configured plus improvised names (case-insensitive, no duplicates).
    """

    configured: tuple[NpcProfile, ...]
    improvised: tuple[NpcProfile, ...] = ()
    on_stage: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        known = self.known_names()
        staged: set[str] = set()
        for name in self.on_stage:
            folded = name.lower()
            if folded not in known:
                raise OverhearError(f"on-stage NPC {name!r} is not a known NPC")
            if folded in staged:
                raise OverhearError(f"duplicate on-stage NPC {name!r}")
            staged.add(folded)

    def known_names(self) -> dict[str, str]:
        """Folded name -> canonical name, configured then improvised."""
        names: dict[str, str] = {}
        for npc in self.configured + self.improvised:
            names.setdefault(npc.name.lower(), npc.name)
        return names

    def resolve(self, npc: str) -> str | None:
        return self.known_names().get(npc.lower())

    def is_on_stage(self, npc: str) -> bool:
        folded = npc.lower()
        return any(name.lower() == folded for name in self.on_stage)

    def to_dict(self) -> dict[str, Any]:
        return {
            "on_stage": list(self.on_stage),
            "configured": [npc.to_dict() for npc in self.configured],
            "improvised": [npc.to_dict() for npc in self.improvised],
        }


def initial_stage(corpus: Corpus) -> StageState:
    return StageState(configured=corpus.npcs)


@dataclass(frozen=True)
class ToolResult:
    """Outcome fed back to the model (message) and to the operator (suggestions)."""

    ok: bool
    message: str
    suggestions: tuple[Suggestion, ...] = ()
    state_delta: Mapping[str, Any] | None = None

    def __post_init__(self) -> None:
        if not self.ok and self.suggestions:
            raise OverhearError("failed tool results must not carry suggestions")


def dispatch(
    state: StageState,
    corpus: Corpus,
    call: ToolCall,
    at_seconds: float,
    seed: int = 0,
) -> tuple[StageState, ToolResult]:
    """Route a validated call to its handler; returns updated state and result.

    Every operator-visible effect is carried as a Suggestion on the result.
    """
    call = validate_call(call.name, call.arguments)
    args = call.arguments
    if call.name == "npc_stage_event":
        return stage_event(state, args["event_type"], args.get("npc"), at_seconds)
    if call.name == "npc_speech":
        return npc_speech(state, args["npc"], args["speech"], at_seconds)
    if call.name == "suggest_improvised_npc":
        return suggest_improvised_npc(
            state,
            seed,
            at_seconds,
            race=args.get("race"),
            background=args.get("background"),
            culture=args.get("culture"),
        )
    return state, search_and_show(state, corpus, args["entity_type"], args["name"], at_seconds)


def _unknown_npc(state: StageState, npc: str) -> ToolResult:
    known = ", ".join(state.known_names().values()) or "(none)"
    return ToolResult(ok=False, message=f"No NPC named {npc}; known NPCs: {known}")


def stage_event(
    state: StageState, action: str, npc: str | None, at_seconds: float
) -> tuple[StageState, ToolResult]:
    if action == "LIST_ALL_NPCS":
        names = ", ".join(state.known_names().values()) or "(none)"
        return state, ToolResult(ok=True, message=f"NPCs in this game: {names}")
    if action == "LIST_STAGE_NPCS":
        names = ", ".join(state.on_stage) or "(none)"
        return state, ToolResult(ok=True, message=f"NPCs on stage: {names}")
    assert npc is not None  # schema requires npc for add/remove
    canonical = state.resolve(npc)
    if canonical is None:
        return state, _unknown_npc(state, npc)
    if action == "ADD_TO_STAGE":
        if state.is_on_stage(canonical):
            return state, ToolResult(ok=True, message=f"{canonical} is already on stage; no change.")
        new_state = replace(state, on_stage=state.on_stage + (canonical,))
        suggestion = Suggestion.stage_event(at_seconds, StageAction.ADD, canonical)
        return new_state, ToolResult(
            ok=True,
            message=f"{canonical} is now on stage.",
            suggestions=(suggestion,),
            state_delta={"action": "add", "npc": canonical},
        )
    if not state.is_on_stage(canonical):
        return state, ToolResult(ok=True, message=f"{canonical} is not on stage; no change.")
    remaining = tuple(name for name in state.on_stage if name.lower() != canonical.lower())
    new_state = replace(state, on_stage=remaining)
    suggestion = Suggestion.stage_event(at_seconds, StageAction.REMOVE, canonical)
    return new_state, ToolResult(
        ok=True,
        message=f"{canonical} has been removed from the stage.",
        suggestions=(suggestion,),
        state_delta={"action": "remove", "npc": canonical},
    )


def npc_speech(
    state: StageState, npc: str, speech: str, at_seconds: float
) -> tuple[StageState, ToolResult]:
    """Show NPC speech; an off-stage speaker is implicitly staged first so the
    operator UI never shows speech from an absent portrait."""
    canonical = state.resolve(npc)
    if canonical is None:
        return state, _unknown_npc(state, npc)
    suggestions: list[Suggestion] = []
    delta = None
    if not state.is_on_stage(canonical):
        state = replace(state, on_stage=state.on_stage + (canonical,))
        suggestions.append(Suggestion.stage_event(at_seconds, StageAction.ADD, canonical))
        delta = {"action": "add", "npc": canonical}
        message = f"{canonical} was added to the stage and their speech has been shown."
    else:
        message = f"{canonical}'s speech has been shown on stage."
    suggestions.append(Suggestion.npc_speech(at_seconds, canonical, speech))
    return state, ToolResult(
        ok=True, message=message, suggestions=tuple(suggestions), state_delta=delta
    )


def suggest_improvised_npc(
    state: StageState,
    seed: int,
    at_seconds: float,
    race: str | None = None,
    background: str | None = None,
    culture: str | None = None,
) -> tuple[StageState, ToolResult]:
    taken = frozenset(state.known_names())
    generated = generate_npc(seed, taken, race=race, background=background, culture=culture)
    profile = NpcProfile(name=generated.name, description=generated.describe())
    new_state = replace(state, improvised=state.improvised + (profile,))
    suggestion = Suggestion.improvised_npc(at_seconds, race=race, background=background, culture=culture)
    message = (
        f"Improvised NPC: {generated.name}\n"
        f"Race: {generated.race}\n"
        f"Background: {generated.background}\n"
        f"Culture: {generated.culture}\n"
        f"Trait: {generated.trait}\n"
        f"Quirk: {generated.quirk}"
    )
    return new_state, ToolResult(
        ok=True,
        message=message,
        suggestions=(suggestion,),
        state_delta={"improvised_npc_added": generated.to_dict()},
    )


def _type_name(entity_type: EntityType) -> str:
    return "".join(part.capitalize() for part in entity_type.value.split("_"))


def search_and_show(
    state: StageState,
    corpus: Corpus,
    entity_type: str | EntityType,
    name: str,
    at_seconds: float,
) -> ToolResult:
    """Exact hits emit a game-data suggestion; fuzzy results only report
    candidate names so a misheard name never surfaces the wrong entity."""
    etype = entity_type if isinstance(entity_type, EntityType) else EntityType.parse(entity_type)
    type_name = _type_name(etype)
    results = search_entity(corpus, etype, name)
    if not results:
        return ToolResult(ok=False, message=f"No {type_name} entries found matching {name!r}.")
    if results[0].name.lower() == name.lower():
        entity = results[0]
        suggestion = Suggestion.game_data(at_seconds, etype, entity.name)
        message = (
            f"{entity.body} — The {type_name}'s information has been shown to the DM. "
            "You do not need to echo any of this information to the DM."
        )
        return ToolResult(ok=True, message=message, suggestions=(suggestion,))
    names = ", ".join(entity.name for entity in results)
    return ToolResult(
        ok=True,
        message=(
            f"No exact match for {name!r}. Closest {type_name} matches: {names}. "
            "Call search_dnd again with the exact name to show one to the DM."
        ),
    )
