// Pure projection of the session event stream onto the stage view.
//
// The UI never decides stage membership on its own: membership changes only
// on stage_event suggestions (the engine emits an explicit add before speech
// from an off-stage NPC), so replaying the event log always reproduces the
// server's GET /stage state.

import type { NpcProfile, SessionEvent, SuggestionEvent } from "./types.js";
import { isSuggestion } from "./types.js";

export const SPEECH_BUBBLE_MS = 8000;

export interface SpeechBubble {
  npc: string;
  speech: string;
  shownAtMs: number;
}

export interface StageProjection {
  onStage: string[];
  bubbles: SpeechBubble[];
  improvised: NpcProfile[];
  lastSeq: number;
}

export function initialProjection(): StageProjection {
  return { onStage: [], bubbles: [], improvised: [], lastSeq: 0 };
}

function sameNpc(a: string, b: string): boolean {
  return a.toLowerCase() === b.toLowerCase();
}

function applySuggestion(state: StageProjection, event: SuggestionEvent, nowMs: number): StageProjection {
  if (event.kind === "stage_event" && event.npc) {
    if (event.action === "add") {
      if (state.onStage.some((name) => sameNpc(name, event.npc!))) return state;
      return { ...state, onStage: [...state.onStage, event.npc] };
    }
    return {
      ...state,
      onStage: state.onStage.filter((name) => !sameNpc(name, event.npc!)),
      bubbles: state.bubbles.filter((bubble) => !sameNpc(bubble.npc, event.npc!)),
    };
  }
  if (event.kind === "npc_speech" && event.npc && event.speech) {
    const bubble: SpeechBubble = { npc: event.npc, speech: event.speech, shownAtMs: nowMs };
    return { ...state, bubbles: [...state.bubbles.filter((b) => !sameNpc(b.npc, event.npc!)), bubble] };
  }
  return state;
}

export function applyEvent(state: StageProjection, event: SessionEvent, nowMs = 0): StageProjection {
  if (event.seq <= state.lastSeq) return state; // replayed duplicate after reconnect
  let next: StageProjection = { ...state, lastSeq: event.seq };
  if (isSuggestion(event)) {
    next = { ...applySuggestion(next, event, nowMs), lastSeq: event.seq };
  } else if (event.type === "tool_result") {
    const delta = event.state_delta as { improvised_npc_added?: Record<string, string> } | null;
    const added = delta?.improvised_npc_added;
    if (added && !next.improvised.some((npc) => sameNpc(npc.name, added.name))) {
      next = {
        ...next,
        improvised: [
          ...next.improvised,
          { name: added.name, description: `${added.race} ${added.background} from ${added.culture}` },
        ],
      };
    }
  }
  return next;
}

export function expireBubbles(state: StageProjection, nowMs: number): StageProjection {
  const live = state.bubbles.filter((bubble) => nowMs - bubble.shownAtMs < SPEECH_BUBBLE_MS);
  return live.length === state.bubbles.length ? state : { ...state, bubbles: live };
}

export function replay(events: SessionEvent[], nowMs = 0): StageProjection {
  return events.reduce((state, event) => applyEvent(state, event, nowMs), initialProjection());
}

export function portraitInitials(name: string): string {
  return name
    .split(/\s+/)
    .filter(Boolean)
    .slice(0, 2)
    .map((word) => word[0].toUpperCase())
    .join("");
}
