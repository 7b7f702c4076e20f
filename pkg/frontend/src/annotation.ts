// Annotation view model: rating scale, score-dependent sublabel checklist,
// progress tracking, and POST body construction. The sublabel sets come from
// the server's schema endpoint; nothing is hardcoded client-side.

import type { AnnotationRecord, AnnotationSchema, SessionEvent, SuggestionEvent } from "./types.js";
import { isSuggestion } from "./types.js";

export interface AnnotationItem {
  suggestion: SuggestionEvent;
  transcript: string;
  intervalIndex: number;
  done: boolean;
  // present only when the session's interval events carry an audio
  // reference; text-interval sessions have no clips
  audioUrl?: string;
}

export interface AnnotationDraft {
  suggestionId: string;
  score: number | null;
  sublabels: string[];
  comment: string;
}

export function emptyDraft(suggestionId: string): AnnotationDraft {
  return { suggestionId, score: null, sublabels: [], comment: "" };
}

export function sublabelsForScore(schema: AnnotationSchema, score: number): string[] {
  const entry = schema.scores.find((s) => s.score === score);
  return entry ? [...entry.sublabels] : [];
}

export function labelForScore(schema: AnnotationSchema, score: number): string {
  return schema.scores.find((s) => s.score === score)?.label ?? String(score);
}

export function selectScore(draft: AnnotationDraft, schema: AnnotationSchema, score: number): AnnotationDraft {
  // switching scores resets sublabels: each score has its own checklist
  const allowed = new Set(sublabelsForScore(schema, score));
  return {
    ...draft,
    score,
    sublabels: draft.score === score ? draft.sublabels.filter((s) => allowed.has(s)) : [],
  };
}

export function toggleSublabel(draft: AnnotationDraft, schema: AnnotationSchema, key: string): AnnotationDraft {
  if (draft.score === null) return draft;
  const allowed = new Set(sublabelsForScore(schema, draft.score));
  if (!allowed.has(key)) return draft;
  const active = draft.sublabels.includes(key);
  return {
    ...draft,
    sublabels: active ? draft.sublabels.filter((s) => s !== key) : [...draft.sublabels, key],
  };
}

export function draftIsSubmittable(draft: AnnotationDraft): boolean {
  return draft.score !== null;
}

export function buildSubmission(
  draft: AnnotationDraft,
  sessionId: string,
  annotatorId: string,
): AnnotationRecord {
  if (draft.score === null) throw new Error("select a score before submitting");
  const record: AnnotationRecord = {
    session_id: sessionId,
    suggestion_id: draft.suggestionId,
    annotator_id: annotatorId,
    score: draft.score,
    sublabels: [...draft.sublabels],
  };
  if (draft.comment.trim()) record.comment = draft.comment.trim();
  return record;
}

/** Pair every suggestion event with its interval's transcript and clip for
 * playback context. */
export function annotationItems(events: SessionEvent[], done: Set<string>): AnnotationItem[] {
  let transcript = "";
  let intervalIndex = -1;
  let audioUrl: string | undefined;
  const items: AnnotationItem[] = [];
  for (const event of events) {
    if (event.type === "interval_received") {
      transcript = typeof event.transcript === "string" ? event.transcript : "";
      intervalIndex = Number(event.index ?? -1);
      audioUrl = typeof event.audio_url === "string" ? event.audio_url : undefined;
    } else if (isSuggestion(event)) {
      items.push({
        suggestion: event,
        transcript,
        intervalIndex,
        done: done.has(event.suggestion_id),
        ...(audioUrl ? { audioUrl } : {}),
      });
    }
  }
  return items;
}

/** Earlier intervals for the "get more context" control. */
export function earlierContext(events: SessionEvent[], beforeIndex: number, count = 3): string[] {
  const transcripts: string[] = [];
  for (const event of events) {
    if (event.type === "interval_received" && Number(event.index) < beforeIndex) {
      if (typeof event.transcript === "string") transcripts.push(event.transcript);
    }
  }
  return transcripts.slice(-count);
}

export function restoreProgress(records: AnnotationRecord[], annotatorId: string): Set<string> {
  return new Set(
    records.filter((r) => r.annotator_id === annotatorId).map((r) => r.suggestion_id),
  );
}

export function nextPending(items: AnnotationItem[]): AnnotationItem | null {
  return items.find((item) => !item.done) ?? null;
}
