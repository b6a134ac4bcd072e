// Thin typed client for the game service endpoints.

import {
  ActionWire, GameResult, InstructionWire, JoinInfo, PollResponse, SessionInfo,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public body: unknown) {
    super(`api error ${status}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await resp.json().catch(() => null);
  if (!resp.ok) {
    throw new ApiError(resp.status, body);
  }
  return body as T;
}

export interface SeatSpec {
  kind: "thinker" | "random" | "scripted" | "human";
  checkpoint?: string;
  temperature?: number;
  adapter?: Record<string, unknown>;
}

export class GameApi {
  constructor(public base: string) {}

  health(): Promise<{ ok: boolean }> {
    return request(this.base, "/health");
  }

  createSession(seats: SeatSpec[], seed?: number, humanDeadline?: number): Promise<SessionInfo> {
    return request(this.base, "/sessions", {
      method: "POST",
      body: JSON.stringify({ seats, seed, human_deadline: humanDeadline }),
    });
  }

  join(sessionId: string, seat: number): Promise<JoinInfo> {
    return request(this.base, `/sessions/${sessionId}/join`, {
      method: "POST",
      body: JSON.stringify({ seat }),
    });
  }

  poll(sessionId: string, seat: number, token: string, since: number,
       wait = 0): Promise<PollResponse> {
    const q = new URLSearchParams({
      token, since: String(since), wait: String(wait),
    });
    return request(this.base, `/sessions/${sessionId}/seats/${seat}/events?${q}`);
  }

  submitAction(sessionId: string, seat: number, token: string,
               action: ActionWire): Promise<{ ok: boolean }> {
    return request(this.base, `/sessions/${sessionId}/seats/${seat}/action`, {
      method: "POST",
      body: JSON.stringify({ token, action }),
    });
  }

  submitSpeech(sessionId: string, seat: number, token: string,
               instruction: InstructionWire): Promise<{ ok: boolean }> {
    return request(this.base, `/sessions/${sessionId}/seats/${seat}/speech`, {
      method: "POST",
      body: JSON.stringify({ token, instruction }),
    });
  }

  result(sessionId: string): Promise<GameResult> {
    return request(this.base, `/sessions/${sessionId}/result`);
  }

  renderPreview(instruction: InstructionWire): Promise<{ text: string }> {
    return request(this.base, "/render", {
      method: "POST",
      body: JSON.stringify({ instruction }),
    });
  }
}
