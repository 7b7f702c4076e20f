// Wire types mirroring the service's flat snake_case JSON records.

export type SuggestionKind = "game_data" | "stage_event" | "npc_speech" | "improvised_npc";

export type EventType =
  | "interval_received"
  | "transcript_ready"
  | "model_thought"
  | "tool_call"
  | "tool_result"
  | "suggestion"
  | "context_truncated"
  | "timing"
  | "error";

export interface SessionEvent {
  session_id: string;
  seq: number;
  wall_clock_ms: number;
  session_seconds: number;
  type: EventType;
  // flattened type-specific payload fields
  [key: string]: unknown;
}

export interface SuggestionEvent extends SessionEvent {
  type: "suggestion";
  suggestion_id: string;
  kind: SuggestionKind;
  at_seconds: number;
  entity_type?: string;
  name?: string;
  action?: "add" | "remove";
  npc?: string;
  speech?: string;
  race?: string;
  background?: string;
  culture?: string;
}

export interface ErrorFrame {
  type: "error";
  code: number;
  detail: string;
}

export interface NpcProfile {
  name: string;
  portrait_ref?: string;
  description?: string;
}

export interface StageSnapshot {
  on_stage: string[];
  configured: NpcProfile[];
  improvised: NpcProfile[];
}

export interface GameEntity {
  entity_type: string;
  name: string;
  body: string;
  source?: string;
}

export interface ScoreEntry {
  score: number;
  key: string;
  label: string;
  sublabels: string[];
}

export interface AnnotationSchema {
  scores: ScoreEntry[];
}

export interface AnnotationRecord {
  session_id?: string;
  suggestion_id: string;
  annotator_id: string;
  score: number;
  sublabels: string[];
  comment?: string;
}

export function isSuggestion(event: SessionEvent): event is SuggestionEvent {
  return event.type === "suggestion";
}
