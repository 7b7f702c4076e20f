// DOM construction for the three views. All state lives in the models;
// these functions only draw.

import type { FeedCard } from "./feed.js";
import type { StageProjection } from "./stageProjection.js";
import { portraitInitials } from "./stageProjection.js";
import type { AnnotationSchema, NpcProfile } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderCard(
  card: FeedCard,
  onFeedback: (suggestionId: string, action: "accept" | "dismiss") => void,
): HTMLElement {
  const root = el("article", `card card-${card.kind}`);
  root.dataset.suggestionId = card.suggestionId;
  const header = el("header");
  header.append(el("span", "card-kind", card.kind.replace("_", " ")));
  header.append(el("span", "card-time", `${card.atSeconds.toFixed(0)}s`));
  root.append(header);
  root.append(el("h3", "card-title", card.title));
  if (card.detail) root.append(el("p", "card-detail", card.detail));
  const body = el("p", "card-body", "");
  body.hidden = true;
  root.append(body);
  if (card.profile) {
    const dl = el("dl", "npc-profile");
    for (const [key, value] of Object.entries(card.profile)) {
      dl.append(el("dt", undefined, key));
      dl.append(el("dd", undefined, value));
    }
    root.append(dl);
  }
  const actions = el("footer", "card-actions");
  for (const action of ["accept", "dismiss"] as const) {
    const button = el("button", `btn-${action}`, action);
    button.disabled = card.feedback !== undefined;
    if (card.feedback === action) button.classList.add("chosen");
    button.addEventListener("click", () => onFeedback(card.suggestionId, action));
    actions.append(button);
  }
  root.append(actions);
  return root;
}

export function setCardBody(cardNode: HTMLElement, bodyText: string): void {
  const body = cardNode.querySelector<HTMLElement>(".card-body");
  if (body) {
    body.textContent = bodyText;
    body.hidden = false;
  }
}

export function renderStage(
  projection: StageProjection,
  portraits: Map<string, NpcProfile>,
): HTMLElement {
  const root = el("div", "stage-grid");
  for (const name of projection.onStage) {
    const tile = el("figure", "npc-tile");
    tile.dataset.npc = name;
    const profile = portraits.get(name.toLowerCase());
    if (profile?.portrait_ref) {
      const img = el("img", "npc-portrait");
      img.src = profile.portrait_ref;
      img.alt = name;
      img.onerror = () => {
        img.replaceWith(el("div", "npc-initials", portraitInitials(name)));
      };
      tile.append(img);
    } else {
      tile.append(el("div", "npc-initials", portraitInitials(name)));
    }
    tile.append(el("figcaption", undefined, name));
    const bubble = projection.bubbles.find((b) => b.npc.toLowerCase() === name.toLowerCase());
    if (bubble) tile.append(el("div", "speech-bubble", bubble.speech));
    root.append(tile);
  }
  if (!projection.onStage.length) {
    root.append(el("p", "stage-empty", "No NPCs on stage"));
  }
  return root;
}

export function renderScoreButtons(
  schema: AnnotationSchema,
  selected: number | null,
  onSelect: (score: number) => void,
): HTMLElement {
  const root = el("div", "score-row");
  for (const entry of schema.scores) {
    const button = el("button", "score-btn", entry.label);
    button.dataset.score = String(entry.score);
    if (entry.score === selected) button.classList.add("chosen");
    button.addEventListener("click", () => onSelect(entry.score));
    root.append(button);
  }
  return root;
}

export function renderSublabelChecklist(
  sublabels: string[],
  active: string[],
  onToggle: (key: string) => void,
): HTMLElement {
  const root = el("div", "sublabel-list");
  for (const key of sublabels) {
    const label = el("label", "sublabel");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = active.includes(key);
    box.addEventListener("change", () => onToggle(key));
    label.append(box, document.createTextNode(key));
    root.append(label);
  }
  return root;
}

export function renderBanner(text: string, kind: "info" | "error"): HTMLElement {
  return el("div", `banner banner-${kind}`, text);
}
