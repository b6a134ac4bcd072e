// Client-side session state: the visible event cache, the pending decision,
// and reconnection. Everything rendered comes from the server; the client
// never derives hidden information locally.

import { GameApi } from "./api.js";
import {
  GameEventWire, GameResult, JoinInfo, ObservationSummary, PendingDecision,
  PollResponse,
} from "./types.js";

export interface TimedOutMark {
  day: number;
  kind: string;
}

export class ClientSession {
  events: GameEventWire[] = [];
  pending: PendingDecision | null = null;
  observation: ObservationSummary | null = null;
  gameOver = false;
  winner: string | null = null;
  timedOut: TimedOutMark[] = [];
  private next = 0;
  private awaitingOwnSubmit = false;

  constructor(public api: GameApi, public sessionId: string,
              public seat: number, public token: string,
              public join: JoinInfo) {}

  /** Apply one poll response; returns the newly visible events. */
  ingest(resp: PollResponse): GameEventWire[] {
    const fresh = resp.events;
    this.events.push(...fresh);
    this.next = resp.next;
    if (this.pending !== null && resp.pending === null && this.awaitingOwnSubmit) {
      // our decision got resolved without us: the server fallback acted
      this.timedOut.push({ day: resp.observation.day, kind: this.pending.kind });
    }
    this.pending = resp.pending;
    this.awaitingOwnSubmit = resp.pending !== null;
    this.observation = resp.observation;
    this.gameOver = resp.game_over;
    this.winner = resp.winner;
    return fresh;
  }

  async poll(wait = 0): Promise<GameEventWire[]> {
    const resp = await this.api.poll(this.sessionId, this.seat, this.token,
                                     this.next, wait);
    return this.ingest(resp);
  }

  markSubmitted(): void {
    this.awaitingOwnSubmit = false;
  }

  /** Reconnect: drop the cache, replay the visible history from the start. */
  async resume(): Promise<void> {
    this.events = [];
    this.next = 0;
    await this.poll();
  }

  /** Votes come from server events only, which the engine appends when a
      session closes, so an open round's ballots are simply absent. */
  closedVoteRounds(): { day: number; round: number; ballots: Record<string, number | null> }[] {
    return this.observation?.votes ?? [];
  }

  async result(): Promise<GameResult> {
    return this.api.result(this.sessionId);
  }
}

export async function joinSession(api: GameApi, sessionId: string,
                                  seat: number): Promise<ClientSession> {
  const join = await api.join(sessionId, seat);
  const session = new ClientSession(api, sessionId, seat, join.token, join);
  await session.poll();
  return session;
}
