// Console wiring: session picker, live feed + stage, annotation view.

import { ApiClient, EventStream } from "./api.js";
import { annotationItems, buildSubmission, emptyDraft, nextPending, restoreProgress, selectScore, sublabelsForScore, toggleSublabel, earlierContext } from "./annotation.js";
import type { AnnotationDraft } from "./annotation.js";
import { applyFeedEvent, initialFeed, markFeedback } from "./feed.js";
import type { FeedState } from "./feed.js";
import { applyEvent, expireBubbles, initialProjection } from "./stageProjection.js";
import type { StageProjection } from "./stageProjection.js";
import { renderBanner, renderCard, renderScoreButtons, renderStage, renderSublabelChecklist, setCardBody } from "./render.js";
import type { AnnotationSchema, NpcProfile, SessionEvent } from "./types.js";

const api = new ApiClient("");
const wsBase = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}`;

const state = {
  sessionId: "",
  annotatorId: localStorage.getItem("annotator_id") ?? "annotator",
  feed: initialFeed() as FeedState,
  stage: initialProjection() as StageProjection,
  events: [] as SessionEvent[],
  schema: null as AnnotationSchema | null,
  portraits: new Map<string, NpcProfile>(),
  done: new Set<string>(),
  draft: null as AnnotationDraft | null,
  stream: null as EventStream | null,
};

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function redrawFeed(): void {
  const container = $("feed");
  container.replaceChildren();
  for (const card of [...state.feed.cards].reverse()) {
    const node = renderCard(card, onFeedback);
    container.append(node);
    if (card.kind === "game_data" && card.entityType && card.entityName) {
      api
        .searchEntities(card.entityType, card.entityName)
        .then((result) => {
          const hit = result.entities.find(
            (entity) => entity.name.toLowerCase() === card.entityName!.toLowerCase(),
          );
          if (hit) setCardBody(node, hit.body);
        })
        .catch(() => undefined);
    }
  }
}

function redrawStage(): void {
  const projected = expireBubbles(state.stage, Date.now());
  $("stage").replaceChildren(renderStage(projected, state.portraits));
}

function redrawAnnotation(): void {
  const container = $("annotate");
  container.replaceChildren();
  if (!state.schema) return;
  const items = annotationItems(state.events, state.done);
  const progress = document.createElement("p");
  progress.textContent = `${items.filter((i) => i.done).length} / ${items.length} annotated`;
  container.append(progress);
  const item = nextPending(items);
  if (!item) {
    container.append(renderBanner("All suggestions annotated for this session.", "info"));
    return;
  }
  if (!state.draft || state.draft.suggestionId !== item.suggestion.suggestion_id) {
    state.draft = emptyDraft(item.suggestion.suggestion_id);
  }
  const draft = state.draft;
  if (item.audioUrl) {
    const player = document.createElement("audio");
    player.controls = true;
    player.src = item.audioUrl;
    container.append(player);
  }
  const transcript = document.createElement("blockquote");
  transcript.textContent = item.transcript || "(no transcript)";
  container.append(transcript);
  const moreContext = document.createElement("button");
  moreContext.textContent = "get more context";
  moreContext.addEventListener("click", () => {
    const earlier = earlierContext(state.events, item.intervalIndex);
    transcript.textContent = [...earlier, item.transcript].join("\n");
  });
  container.append(moreContext);
  const suggestionCard = renderCard(
    {
      suggestionId: item.suggestion.suggestion_id,
      kind: item.suggestion.kind,
      atSeconds: item.suggestion.at_seconds,
      title: item.suggestion.kind.replace("_", " "),
      detail: JSON.stringify(
        Object.fromEntries(
          Object.entries(item.suggestion).filter(
            ([key]) => !["session_id", "seq", "wall_clock_ms", "session_seconds", "type"].includes(key),
          ),
        ),
      ),
    },
    () => undefined,
  );
  suggestionCard.querySelector(".card-actions")?.remove();
  container.append(suggestionCard);
  container.append(
    renderScoreButtons(state.schema, draft.score, (score) => {
      state.draft = selectScore(draft, state.schema!, score);
      redrawAnnotation();
    }),
  );
  if (draft.score !== null) {
    container.append(
      renderSublabelChecklist(sublabelsForScore(state.schema, draft.score), draft.sublabels, (key) => {
        state.draft = toggleSublabel(draft, state.schema!, key);
        redrawAnnotation();
      }),
    );
    const comment = document.createElement("textarea");
    comment.placeholder = "optional comment";
    comment.value = draft.comment;
    comment.addEventListener("input", () => {
      draft.comment = comment.value;
    });
    container.append(comment);
    const submit = document.createElement("button");
    submit.textContent = "submit rating";
    submit.addEventListener("click", async () => {
      const record = buildSubmission(draft, state.sessionId, state.annotatorId);
      await api.submitAnnotation(record);
      state.done.add(draft.suggestionId);
      state.draft = null;
      redrawAnnotation();
    });
    container.append(submit);
  }
}

function onFeedback(suggestionId: string, action: "accept" | "dismiss"): void {
  api
    .sendFeedback(suggestionId, action)
    .then(() => {
      state.feed = markFeedback(state.feed, suggestionId, action);
      redrawFeed();
    })
    .catch((error) => showStatus(String(error), "error"));
}

function showStatus(text: string, kind: "info" | "error"): void {
  $("status").replaceChildren(renderBanner(text, kind));
}

function handleEvent(event: SessionEvent): void {
  state.events.push(event);
  state.feed = applyFeedEvent(state.feed, event);
  state.stage = applyEvent(state.stage, event, Date.now());
  redrawFeed();
  redrawStage();
  redrawAnnotation();
}

async function openSession(sessionId: string): Promise<void> {
  state.stream?.close();
  state.sessionId = sessionId;
  state.feed = initialFeed();
  state.stage = initialProjection();
  state.events = [];
  state.done = new Set();
  state.draft = null;

  const stage = await api.stage(sessionId);
  for (const profile of [...stage.configured, ...stage.improvised]) {
    state.portraits.set(profile.name.toLowerCase(), profile);
  }
  const existing = await api.annotations(sessionId, state.annotatorId);
  state.done = restoreProgress(existing.annotations, state.annotatorId);

  const stream = new EventStream(wsBase, sessionId, {
    onEvent: handleEvent,
    onErrorFrame: (frame) => showStatus(`server error ${frame.code}: ${frame.detail}`, "error"),
    onStatus: (connected) =>
      showStatus(connected ? `connected to ${sessionId}` : "disconnected; reconnecting...", connected ? "info" : "error"),
  });
  state.stream = stream;
  stream.connect();
  setInterval(redrawStage, 1000); // expire speech bubbles
}

async function refreshSessions(): Promise<void> {
  const sidebar = $("sessions");
  const { sessions } = await api.listSessions();
  sidebar.replaceChildren();
  for (const id of sessions) {
    const button = document.createElement("button");
    button.className = "session-link";
    button.textContent = id;
    button.addEventListener("click", () => void openSession(id));
    sidebar.append(button);
  }
}

async function boot(): Promise<void> {
  state.schema = await api.annotationSchema();
  await refreshSessions();
  const annotator = document.getElementById("annotator") as HTMLInputElement | null;
  if (annotator) {
    annotator.value = state.annotatorId;
    annotator.addEventListener("change", () => {
      state.annotatorId = annotator.value || "annotator";
      localStorage.setItem("annotator_id", state.annotatorId);
    });
  }
  window.addEventListener("beforeunload", (event) => {
    if (state.draft && state.draft.score !== null) event.preventDefault(); // unsaved-change guard
  });
}

void boot();
