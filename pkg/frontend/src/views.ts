// Pure view builders: each returns an HTML string for the current screen.
// Options always come from the server's pending decision; the client only
// greys out what the server did not list.

import { InstructionDraft, attributeRows, modalityOptions } from "./grid.js";
import {
  ActionWire, GameEventWire, GameResult, ObservationSummary, PendingDecision,
  SEATS,
} from "./types.js";

const esc = (s: unknown) =>
  String(s).replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export function lobbyView(): string {
  return `
  <section class="lobby">
    <h1>Werewolf</h1>
    <label>Server <input id="server" value="http://127.0.0.1:8000"></label>
    <label>Seat <select id="seat">${SEATS.map(s => `<option>${s}</option>`).join("")}</select></label>
    <button id="create">Create game (8 AIs + me)</button>
    <label>or join session <input id="session-id" placeholder="session id"></label>
    <button id="join">Join</button>
  </section>`;
}

export function roleCardView(role: string, seat: number, teammates: number[]): string {
  const mates = teammates.length
    ? `<p class="teammates">Fellow werewolves: ${teammates.join(", ")}</p>` : "";
  return `<header class="role-card">Seat ${seat} — you are <b>${esc(role)}</b>${mates}</header>`;
}

export function eventLineView(ev: GameEventWire): string {
  const d = ev.data as Record<string, unknown>;
  switch (ev.kind) {
    case "death_announce": {
      const seats = d.seats as number[];
      return seats.length
        ? `Day ${ev.day}: players ${seats.join(", ")} died last night.`
        : `Day ${ev.day}: no players were out last night.`;
    }
    case "speech":
      return `Day ${ev.day}: player ${d.seat} spoke.`;
    case "last_words":
      return `Day ${ev.day}: player ${d.seat} gave last words.`;
    case "vote":
      return d.target == null
        ? `Day ${ev.day}: player ${d.voter} abstained.`
        : `Day ${ev.day}: player ${d.voter} voted for player ${d.target}.`;
    case "exile":
      return d.seat == null
        ? `Day ${ev.day}: the vote tied, nobody was exiled.`
        : `Day ${ev.day}: player ${d.seat} was exiled.`;
    case "suicide":
      return `Day ${ev.day}: player ${d.seat} self-destructed — a werewolf.`;
    case "hunter_shot":
      return d.target == null
        ? `Day ${ev.day}: the hunter held fire.`
        : `Day ${ev.day}: player ${d.shooter} shot player ${d.target}.`;
    case "seer_check":
      return `Night ${ev.day}: you checked player ${d.target}: ` +
        (d.is_werewolf ? "a werewolf." : "good.");
    case "witch_act":
      return `Night ${ev.day}: witch action ${d.choice}` +
        (d.target != null ? ` on player ${d.target}.` : ".");
    case "night_kill_vote":
      return `Night ${ev.day}: wolf ${d.wolf} marked player ${d.target} (round ${d.round}).`;
    case "game_over":
      return `Game over: ${d.winner} win.`;
    default:
      return `${ev.kind}`;
  }
}

export function actionPickerView(pending: PendingDecision): string {
  const buttons = pending.options.map((a: ActionWire, i: number) => {
    const label = a.target == null ? a.kind : `${a.kind} ${a.target}`;
    return `<button class="option" data-index="${i}">${esc(label)}</button>`;
  }).join(" ");
  const shown = pending.shown_target != null
    ? `<p>The werewolves' target tonight: player ${pending.shown_target}</p>` : "";
  const deadline = pending.deadline_in != null
    ? `<p class="deadline">${Math.ceil(pending.deadline_in)}s to decide</p>` : "";
  return `<section class="picker"><h2>${esc(pending.kind)}</h2>${shown}${buttons}${deadline}</section>`;
}

export function speechGridView(draft: InstructionDraft, preview: string,
                               allowFreeText = false): string {
  const header = ["player", ...attributeRows()].map(h => `<th>${esc(h)}</th>`).join("");
  const rows = SEATS.map(seat => {
    const cells = attributeRows().map(attr => {
      const options = modalityOptions().map(m => {
        const selected = draft.get(seat, attr) === m ? " selected" : "";
        return `<option value="${m}"${selected}>${m}</option>`;
      }).join("");
      return `<td><select data-seat="${seat}" data-attr="${attr}">${options}</select></td>`;
    }).join("");
    return `<tr><td>${seat}</td>${cells}</tr>`;
  }).join("");
  const freeText = allowFreeText
    ? `<textarea id="free-text" placeholder="free text (listener adapter bound)"></textarea>`
    : "";
  return `
  <section class="speech">
    <table class="grid"><thead><tr>${header}</tr></thead><tbody>${rows}</tbody></table>
    <blockquote id="preview">${esc(preview)}</blockquote>
    ${freeText}
    <button id="submit-speech">Speak</button>
  </section>`;
}

export function finalView(result: GameResult): string {
  const roles = Object.entries(result.roles ?? {})
    .map(([s, r]) => `<li>seat ${s}: ${esc(r)}</li>`).join("");
  const scores = Object.entries(result.behavior_scores ?? {})
    .map(([s, c]) => `<li>seat ${s}: ${c.total.toFixed(1)}</li>`).join("");
  const marks = (result.timed_out ?? [])
    .map(t => `<li>seat ${t.seat} timed out on ${esc(t.kind)} (day ${t.day})</li>`)
    .join("");
  return `
  <section class="final">
    <h1>${esc(result.winner)} win</h1>
    <h2>Roles</h2><ul>${roles}</ul>
    <h2>Behavior scores</h2><ul>${scores}</ul>
    ${marks ? `<h2>Timeouts</h2><ul>${marks}</ul>` : ""}
  </section>`;
}
