import { describe, expect, it } from "vitest";
import { ClientSession } from "../src/session.js";
import { GameApi } from "../src/api.js";
import { ObservationSummary, PollResponse } from "../src/types.js";
import { eventLineView, speechGridView } from "../src/views.js";
import { InstructionDraft } from "../src/grid.js";

function obs(partial: Partial<ObservationSummary> = {}): ObservationSummary {
  return {
    viewer: 1, day: 1, phase: "speech", role: "villager",
    alive: Object.fromEntries([1, 2, 3, 4, 5, 6, 7, 8, 9].map(s => [String(s), true])),
    teammates: [], revealed_roles: {}, announced_deaths: [], votes: [],
    exiles: [], speeches: [], seer_checks: [],
    witch: { antidote_used: false, poison_used: false, known_targets: [], saved: null, poisoned: null },
    wolf_night_votes: [], tied_candidates: [], winner: null,
    ...partial,
  };
}

function poll(partial: Partial<PollResponse>): PollResponse {
  return {
    events: [], next: 0, pending: null, game_over: false, winner: null,
    observation: obs(), ...partial,
  };
}

function makeSession(): ClientSession {
  return new ClientSession(new GameApi("http://unused"), "sid", 1, "tok",
    { token: "tok", seat: 1, role: "villager", teammates: [] });
}

describe("ClientSession", () => {
  it("caches visible events in order", () => {
    const s = makeSession();
    s.ingest(poll({
      events: [{ kind: "death_announce", day: 1, data: { seats: [] } }],
      next: 1,
    }));
    s.ingest(poll({
      events: [{ kind: "speech", day: 1, data: { seat: 4, round: 1 } }],
      next: 2,
    }));
    expect(s.events.map(e => e.kind)).toEqual(["death_announce", "speech"]);
  });

  it("marks a timeout when the server resolves our pending decision", () => {
    const s = makeSession();
    const pending = { kind: "vote", options: [], shown_target: null, header: null, deadline_in: 5 };
    s.ingest(poll({ pending }));
    // no markSubmitted(): the server's fallback acted for us
    s.ingest(poll({ pending: null, observation: obs({ day: 2 }) }));
    expect(s.timedOut).toEqual([{ day: 2, kind: "vote" }]);
  });

  it("does not mark a timeout after an own submission", () => {
    const s = makeSession();
    const pending = { kind: "vote", options: [], shown_target: null, header: null, deadline_in: 5 };
    s.ingest(poll({ pending }));
    s.markSubmitted();
    s.ingest(poll({ pending: null }));
    expect(s.timedOut).toEqual([]);
  });

  it("shows ballots only from server-closed voting sessions", () => {
    const s = makeSession();
    s.ingest(poll({}));
    expect(s.closedVoteRounds()).toEqual([]);
    const votes = [{ day: 1, round: 1, ballots: { "1": 4, "2": null } }];
    s.ingest(poll({ observation: obs({ votes }) }));
    expect(s.closedVoteRounds()).toEqual(votes);
  });
});

describe("views", () => {
  it("renders event lines without leaking structure", () => {
    expect(eventLineView({ kind: "death_announce", day: 2, data: { seats: [1, 2] } }))
      .toContain("players 1, 2 died");
    expect(eventLineView({ kind: "death_announce", day: 1, data: { seats: [] } }))
      .toContain("no players were out");
    expect(eventLineView({ kind: "exile", day: 1, data: { seat: null, round: 2 } }))
      .toContain("nobody was exiled");
  });

  it("speech grid has one dropdown per cell with exactly six options", () => {
    const html = speechGridView(new InstructionDraft(1), "I have nothing to add.");
    const selects = html.match(/<select/g) ?? [];
    expect(selects.length).toBe(9 * 18);
    const options = html.match(/<option/g) ?? [];
    expect(options.length).toBe(9 * 18 * 6);
  });
});
