from __future__ import annotations

import random

import pytest

from overhear.core import StageAction, SuggestionKind
from overhear.gamedata import Corpus, GameEntity
from overhear.stage import (
    SchemaViolation,
    StageState,
    ToolCall,
    UnknownTool,
    dispatch,
    generate_npc,
    initial_stage,
    npc_speech,
    search_and_show,
    stage_event,
    suggest_improvised_npc,
    validate_call,
)
from oracles import StageOracle


@pytest.fixture()
def stage(corpus) -> StageState:
    return initial_stage(corpus)


def call(tool, **arguments) -> ToolCall:
    return ToolCall(name=tool, arguments=arguments)


class TestValidateCall:
    def test_unknown_tool(self):
        with pytest.raises(UnknownTool):
            validate_call("fly_to_moon", {})

    def test_stage_alias_canonicalized(self):
        validated = validate_call("npc_stage_event", {"event_type": "ADD_NPC_TO_STAGE", "npc": "X"})
        assert validated.arguments["event_type"] == "ADD_TO_STAGE"
        validated = validate_call("npc_stage_event", {"event_type": "REMOVE_NPC_FROM_STAGE", "npc": "X"})
        assert validated.arguments["event_type"] == "REMOVE_FROM_STAGE"

    def test_entity_type_case_insensitive(self):
        validated = validate_call("search_dnd", {"entity_type": "SPELL", "name": "Aid"})
        assert validated.arguments["entity_type"] == "spell"

    def test_unknown_enum_value(self):
        with pytest.raises(SchemaViolation):
            validate_call("search_dnd", {"entity_type": "weapon", "name": "Aid"})

    def test_missing_required(self):
        with pytest.raises(SchemaViolation):
            validate_call("search_dnd", {"entity_type": "spell"})

    def test_unexpected_argument(self):
        with pytest.raises(SchemaViolation):
            validate_call("npc_speech", {"npc": "A", "speech": "hi", "volume": "11"})

    def test_non_string_argument(self):
        with pytest.raises(SchemaViolation):
            validate_call("npc_speech", {"npc": "A", "speech": 3})

    def test_empty_speech_rejected(self):
        with pytest.raises(SchemaViolation):
            validate_call("npc_speech", {"npc": "A", "speech": ""})

    def test_npc_required_for_add_remove(self):
        with pytest.raises(SchemaViolation):
            validate_call("npc_stage_event", {"event_type": "ADD_TO_STAGE"})
        validate_call("npc_stage_event", {"event_type": "LIST_ALL_NPCS"})


class TestStageEvent:
    def test_add_then_remove_round_trip(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("npc_stage_event", event_type="ADD_TO_STAGE", npc="Nemura"), 5.0)
        assert result.ok and state.on_stage == ("Nemura",)
        assert [s.to_dict() for s in result.suggestions] == [
            {"kind": "stage_event", "at_seconds": 5.0, "action": "add", "npc": "Nemura"}
        ]
        state, result = dispatch(state, corpus, call("npc_stage_event", event_type="REMOVE_FROM_STAGE", npc="Nemura"), 6.0)
        assert result.ok and state.on_stage == ()
        assert result.suggestions[0].payload.action is StageAction.REMOVE

    def test_double_add_is_noop_with_one_suggestion_total(self, stage, corpus):
        state, first = dispatch(stage, corpus, call("npc_stage_event", event_type="ADD_TO_STAGE", npc="Nemura"), 1.0)
        state, second = dispatch(state, corpus, call("npc_stage_event", event_type="ADD_TO_STAGE", npc="Nemura"), 2.0)
        assert second.ok
        assert len(first.suggestions) + len(second.suggestions) == 1
        assert state.on_stage == ("Nemura",)
        assert "already on stage" in second.message

    def test_remove_absent_is_noop(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("npc_stage_event", event_type="REMOVE_FROM_STAGE", npc="Nemura"), 1.0)
        assert result.ok and not result.suggestions
        assert "not on stage" in result.message

    def test_unknown_npc_fails_with_known_list(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("npc_stage_event", event_type="ADD_TO_STAGE", npc="Zorblax"), 1.0)
        assert not result.ok and not result.suggestions
        assert result.message.startswith("No NPC named Zorblax; known NPCs:")
        assert "Nemura" in result.message

    def test_case_insensitive_resolution(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("npc_stage_event", event_type="ADD_TO_STAGE", npc="nemura"), 1.0)
        assert state.on_stage == ("Nemura",)

    def test_list_all_and_stage(self, stage, corpus):
        _, result = stage_event(stage, "LIST_ALL_NPCS", None, 0.0)
        assert "Nemura" in result.message and not result.suggestions
        _, result = stage_event(stage, "LIST_STAGE_NPCS", None, 0.0)
        assert "(none)" in result.message


class TestNpcSpeech:
    def test_on_stage_speaker_one_suggestion(self, stage, corpus):
        state, _ = stage_event(stage, "ADD_TO_STAGE", "Nemura", 0.0)
        state, result = npc_speech(state, "Nemura", "hello", 1.0)
        assert [s.kind for s in result.suggestions] == [SuggestionKind.NPC_SPEECH]

    def test_off_stage_speaker_implicitly_added(self, stage, corpus):
        state, result = npc_speech(stage, "Nemura", "hello", 1.0)
        assert [s.kind for s in result.suggestions] == [
            SuggestionKind.STAGE_EVENT,
            SuggestionKind.NPC_SPEECH,
        ]
        assert state.on_stage == ("Nemura",)
        assert result.suggestions[0].payload.action is StageAction.ADD

    def test_unknown_speaker_fails_without_suggestions(self, stage, corpus):
        state, result = npc_speech(stage, "Zorblax", "hello", 1.0)
        assert not result.ok and not result.suggestions
        assert state.on_stage == ()


class TestImprovisedNpc:
    def test_same_seed_same_profile(self, stage, corpus):
        s1, r1 = suggest_improvised_npc(stage, 7, 1.0, race="dwarf")
        s2, r2 = suggest_improvised_npc(stage, 7, 1.0, race="dwarf")
        assert r1.message == r2.message
        assert s1.improvised[-1] == s2.improvised[-1]

    def test_constraints_honored(self, stage, corpus):
        _, result = suggest_improvised_npc(stage, 3, 1.0, race="dwarf", background="pirate")
        assert result.state_delta["improvised_npc_added"]["race"] == "dwarf"
        assert result.state_delta["improvised_npc_added"]["background"] == "pirate"
        assert "Race: dwarf" in result.message

    def test_suggestion_carries_constraints_only(self, stage, corpus):
        _, result = suggest_improvised_npc(stage, 3, 2.0, culture="islander")
        rec = result.suggestions[0].to_dict()
        assert rec == {"kind": "improvised_npc", "at_seconds": 2.0, "culture": "islander"}

    def test_seed_sweep_produces_variety(self, stage, corpus):
        names = {generate_npc(seed).name for seed in range(100)}
        assert len(names) >= 20

    def test_generated_name_avoids_collisions(self):
        first = generate_npc(0)
        second = generate_npc(0, taken_names=frozenset({first.name.lower()}))
        assert second.name.lower() != first.name.lower()

    def test_profile_added_to_state(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("suggest_improvised_npc", race="elf"), 0.0, seed=11)
        assert len(state.improvised) == 1
        assert state.resolve(state.improvised[0].name) is not None


class TestSearchAndShow:
    def test_exact_match_emits_suggestion_with_body(self, stage, corpus):
        result = search_and_show(stage, corpus, "spell", "Augury", 2.0)
        assert result.ok
        assert [s.to_dict() for s in result.suggestions] == [
            {"kind": "game_data", "at_seconds": 2.0, "entity_type": "spell", "name": "Augury"}
        ]
        entity = next(e for e in corpus.entities if e.name == "Augury")
        assert result.message.startswith(entity.body)
        assert "The Spell's information has been shown to the DM." in result.message
        assert "You do not need to echo" in result.message

    def test_type_name_formatting(self, stage, corpus):
        result = search_and_show(stage, corpus, "class_feature", "Flash of Genius", 0.0)
        assert "The ClassFeature's information has been shown" in result.message

    def test_fuzzy_lists_candidates_without_suggestion(self, stage, corpus):
        result = search_and_show(stage, corpus, "spell", "Agury", 2.0)
        assert result.ok and not result.suggestions
        assert "Augury" in result.message
        assert "No exact match" in result.message

    def test_unknown_type_value_is_schema_violation_at_dispatch(self, stage, corpus):
        with pytest.raises(SchemaViolation):
            dispatch(stage, corpus, call("search_dnd", entity_type="weapon", name="Sword"), 0.0)

    def test_empty_type_gives_failure(self):
        from overhear.core import EntityType

        corpus = Corpus(entities=(GameEntity(EntityType.SPELL, "Aid", "b"),))
        result = search_and_show(initial_stage(corpus), corpus, "monster", "Wyvern", 0.0)
        assert not result.ok and not result.suggestions


class TestDispatchProperties:
    def test_purity_same_inputs_same_outputs(self, stage, corpus):
        c = call("npc_stage_event", event_type="ADD_TO_STAGE", npc="Nemura")
        results = [dispatch(stage, corpus, c, 1.0, seed=5) for _ in range(3)]
        assert all(r == results[0] for r in results)

    def test_suggestion_timestamps_equal_dispatch_time(self, stage, corpus):
        state, result = dispatch(stage, corpus, call("npc_speech", npc="Akita", speech="yo"), 123.5)
        assert all(s.at_seconds == 123.5 for s in result.suggestions)

    def test_random_sequences_agree_with_set_oracle(self, corpus):
        rng = random.Random(42)
        npc_names = [npc.name for npc in corpus.npcs]
        state = initial_stage(corpus)
        oracle = StageOracle(npc_names)
        for step in range(200):
            npc = rng.choice(npc_names + ["Unknown Person"])
            action = rng.choice(["ADD_TO_STAGE", "REMOVE_FROM_STAGE"])
            state, result = dispatch(
                state, corpus, call("npc_stage_event", event_type=action, npc=npc), float(step)
            )
            if oracle.resolve(npc) is None:
                assert not result.ok
                continue
            changed = oracle.add(npc) if action == "ADD_TO_STAGE" else oracle.remove(npc)
            assert len(result.suggestions) == (1 if changed else 0)
            assert {n.lower() for n in state.on_stage} == oracle.on_stage
