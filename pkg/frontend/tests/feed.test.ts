// Feed cards from the recorded session: one card per suggestion, typed by
// kind, with improvised profiles captured from the preceding tool result.

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { applyFeedEvent, initialFeed, latestCard, markFeedback } from "../src/feed.js";
import type { SessionEvent } from "../src/types.js";

const session: { events: SessionEvent[] } = JSON.parse(
  readFileSync(new URL("./fixtures/nemura_session.json", import.meta.url), "utf-8"),
);

function feedFrom(events: SessionEvent[]) {
  return events.reduce(applyFeedEvent, initialFeed());
}

describe("feed model", () => {
  it("produces one card per suggestion in stream order", () => {
    const feed = feedFrom(session.events);
    expect(feed.cards.map((card) => card.kind)).toEqual([
      "game_data",
      "game_data",
      "stage_event",
      "npc_speech",
      "stage_event",
      "game_data",
    ]);
    expect(feed.cards[0].title).toBe("spell: Sending");
    expect(feed.cards[3].detail).toContain("lovely weather");
    expect(latestCard(feed)?.title).toBe("class_feature: Flash of Genius");
  });

  it("stage cards describe the action", () => {
    const feed = feedFrom(session.events);
    expect(feed.cards[2].title).toBe("Add Nemura to stage");
    expect(feed.cards[4].title).toBe("Remove Nemura from stage");
  });

  it("improvised cards capture the generated profile from the tool result", () => {
    const events: SessionEvent[] = [
      {
        session_id: "s",
        seq: 1,
        wall_clock_ms: 0,
        session_seconds: 0,
        type: "tool_result",
        ok: true,
        message: "Improvised NPC: Wren",
        state_delta: {
          improvised_npc_added: {
            name: "Wren",
            race: "dwarf",
            background: "smith",
            culture: "the hills",
            trait: "hums while thinking",
            quirk: "collects buttons",
          },
        },
      } as unknown as SessionEvent,
      {
        session_id: "s",
        seq: 2,
        wall_clock_ms: 0,
        session_seconds: 0,
        type: "suggestion",
        suggestion_id: "s:2",
        kind: "improvised_npc",
        at_seconds: 0,
        race: "dwarf",
      } as unknown as SessionEvent,
    ];
    const feed = feedFrom(events);
    expect(feed.cards).toHaveLength(1);
    expect(feed.cards[0].title).toBe("Improvised NPC: Wren");
    expect(feed.cards[0].profile?.quirk).toBe("collects buttons");
    expect(feed.cards[0].detail).toBe("constraints: dwarf");
  });

  it("feedback marks exactly the chosen card", () => {
    let feed = feedFrom(session.events);
    const target = feed.cards[1].suggestionId;
    feed = markFeedback(feed, target, "dismiss");
    expect(feed.cards[1].feedback).toBe("dismiss");
    expect(feed.cards.filter((card) => card.feedback)).toHaveLength(1);
  });
});
