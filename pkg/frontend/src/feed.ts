// Suggestion feed model: turns the event stream into typed cards.

import type { SessionEvent, SuggestionEvent } from "./types.js";
import { isSuggestion } from "./types.js";

export interface ImprovisedProfile {
  name: string;
  race: string;
  background: string;
  culture: string;
  trait: string;
  quirk: string;
}

export interface FeedCard {
  suggestionId: string;
  kind: SuggestionEvent["kind"];
  atSeconds: number;
  title: string;
  detail: string;
  // game-data cards fetch the entity body lazily; improvised cards carry the
  // generated profile captured from the preceding tool result
  entityType?: string;
  entityName?: string;
  profile?: ImprovisedProfile;
  feedback?: "accept" | "dismiss";
}

export interface FeedState {
  cards: FeedCard[];
  lastProfile: ImprovisedProfile | null;
}

export function initialFeed(): FeedState {
  return { cards: [], lastProfile: null };
}

function cardFor(event: SuggestionEvent, lastProfile: ImprovisedProfile | null): FeedCard {
  const base = {
    suggestionId: event.suggestion_id,
    kind: event.kind,
    atSeconds: event.at_seconds,
  };
  switch (event.kind) {
    case "game_data":
      return {
        ...base,
        title: `${event.entity_type}: ${event.name}`,
        detail: "",
        entityType: event.entity_type,
        entityName: event.name,
      };
    case "stage_event":
      return {
        ...base,
        title: event.action === "add" ? `Add ${event.npc} to stage` : `Remove ${event.npc} from stage`,
        detail: event.npc ?? "",
      };
    case "npc_speech":
      return { ...base, title: `${event.npc} says`, detail: event.speech ?? "" };
    case "improvised_npc": {
      const constraints = [event.race, event.background, event.culture].filter(Boolean).join(", ");
      return {
        ...base,
        title: lastProfile ? `Improvised NPC: ${lastProfile.name}` : "Improvised NPC",
        detail: constraints ? `constraints: ${constraints}` : "",
        profile: lastProfile ?? undefined,
      };
    }
  }
}

export function applyFeedEvent(state: FeedState, event: SessionEvent): FeedState {
  if (event.type === "tool_result") {
    const delta = event.state_delta as { improvised_npc_added?: ImprovisedProfile } | null;
    if (delta?.improvised_npc_added) {
      return { ...state, lastProfile: delta.improvised_npc_added };
    }
    return state;
  }
  if (!isSuggestion(event)) return state;
  const card = cardFor(event, state.lastProfile);
  return { cards: [...state.cards, card], lastProfile: null };
}

export function markFeedback(state: FeedState, suggestionId: string, action: "accept" | "dismiss"): FeedState {
  return {
    ...state,
    cards: state.cards.map((card) =>
      card.suggestionId === suggestionId ? { ...card, feedback: action } : card,
    ),
  };
}

export function latestCard(state: FeedState): FeedCard | null {
  return state.cards.length ? state.cards[state.cards.length - 1] : null;
}
