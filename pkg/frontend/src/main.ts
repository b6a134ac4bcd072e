// Browser bootstrap: wires the lobby, per-phase screens, and the composer.

import { GameApi } from "./api.js";
import { InstructionDraft } from "./grid.js";
import { ClientSession, joinSession } from "./session.js";
import {
  actionPickerView, eventLineView, finalView, lobbyView, roleCardView,
  speechGridView,
} from "./views.js";
import { Attribute, Modality } from "./types.js";

const root = () => document.getElementById("app")!;
const logEl = () => document.getElementById("log");

function appendLog(lines: string[]): void {
  const el = logEl();
  if (!el) return;
  for (const line of lines) {
    const p = document.createElement("p");
    p.textContent = line;
    el.appendChild(p);
  }
  el.scrollTop = el.scrollHeight;
}

async function runGame(session: ClientSession): Promise<void> {
  root().innerHTML = `
    ${roleCardView(session.join.role, session.seat, session.join.teammates)}
    <div id="log" class="log"></div>
    <div id="panel"></div>`;
  appendLog(session.events.map(eventLineView));

  const panel = () => document.getElementById("panel")!;
  while (!session.gameOver) {
    const fresh = await session.poll(10);
    appendLog(fresh.map(eventLineView));
    const pending = session.pending;
    if (!pending) continue;
    if (pending.kind === "speech_instruction") {
      await composeSpeech(session);
    } else {
      await pickAction(session);
    }
  }
  const result = await session.result();
  root().innerHTML = finalView(result);
}

function pickAction(session: ClientSession): Promise<void> {
  const pending = session.pending!;
  const panel = document.getElementById("panel")!;
  panel.innerHTML = actionPickerView(pending);
  return new Promise(resolve => {
    panel.querySelectorAll("button.option").forEach(btn => {
      btn.addEventListener("click", async () => {
        const idx = Number((btn as HTMLElement).dataset.index);
        try {
          await session.api.submitAction(session.sessionId, session.seat,
                                         session.token, pending.options[idx]);
          session.markSubmitted();
        } catch (err) {
          console.error(err); // 409 with the legal set: just stay on screen
          return;
        }
        panel.innerHTML = "";
        resolve();
      });
    });
  });
}

async function composeSpeech(session: ClientSession): Promise<void> {
  const pending = session.pending!;
  const draft = new InstructionDraft(session.seat, pending.header);
  const panel = document.getElementById("panel")!;

  const refresh = async () => {
    const { text } = await session.api.renderPreview(draft.toWire());
    panel.innerHTML = speechGridView(draft, text);
    bind();
  };

  const bind = () => {
    panel.querySelectorAll("select").forEach(sel => {
      sel.addEventListener("change", async () => {
        const el = sel as HTMLSelectElement;
        draft.set(Number(el.dataset.seat), el.dataset.attr as Attribute,
                  el.value as Modality);
        const { text } = await session.api.renderPreview(draft.toWire());
        document.getElementById("preview")!.textContent = text;
      });
    });
    panel.querySelector("#submit-speech")!.addEventListener("click", async () => {
      await session.api.submitSpeech(session.sessionId, session.seat,
                                     session.token, draft.toWire());
      session.markSubmitted();
      panel.innerHTML = "";
    });
  };

  await refresh();
  await new Promise<void>(resolve => {
    const timer = setInterval(() => {
      if (!panel.querySelector("#submit-speech")) {
        clearInterval(timer);
        resolve();
      }
    }, 100);
  });
}

export function boot(): void {
  root().innerHTML = lobbyView();
  const byId = (id: string) => document.getElementById(id) as HTMLInputElement;

  byId("create").addEventListener("click", async () => {
    const api = new GameApi(byId("server").value);
    const seat = Number(byId("seat").value);
    const seats = Array.from({ length: 9 }, (_, i) =>
      i + 1 === seat ? { kind: "human" as const } : { kind: "thinker" as const });
    const info = await api.createSession(seats);
    const session = await joinSession(api, info.session_id, seat);
    await runGame(session);
  });

  byId("join").addEventListener("click", async () => {
    const api = new GameApi(byId("server").value);
    const session = await joinSession(api, byId("session-id").value,
                                      Number(byId("seat").value));
    await runGame(session);
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
