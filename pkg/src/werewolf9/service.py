"""Live game service: sessions over HTTP for human seats and adapters.

Each session wraps one engine game.  AI seats act automatically; a human
seat pauses the state machine until its bearer-token holder submits or the
deadline lapses (then the rule-based fallback acts).  Per-seat event streams
carry exactly what that seat may see.
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from fastapi import Body, FastAPI, HTTPException, Query
from pydantic import BaseModel

from . import engine as E
from . import protocol as P
from .engine import Action, DecisionType, Role
from .policy import thinker as T
from .policy.features import SpeechTape, index_to_action, legal_mask
from .policy.thinker import ThinkerParams
from .protocol import FeatureMatrix, generate_with_retries, parse, render

HUMAN_DEADLINE = 60.0
ADAPTER_TIMEOUT = 5.0
MAX_SPEECH_ATTEMPTS = 3


def event_visible_to(ev: E.GameEvent, seat: int, roles: dict[int, Role]) -> bool:
    owner = E._PRIVATE_KINDS.get(ev.kind)
    if owner is None:
        return True
    if owner == "wolves":
        return roles[seat] == Role.WEREWOLF
    if owner == "witch":
        return roles[seat] == Role.WITCH
    if owner == "seer":
        return roles[seat] == Role.SEER
    return False


@dataclass
class SeatBinding:
    kind: str                          # thinker | random | scripted | human
    params: Optional[ThinkerParams] = None
    temperature: float = 0.5
    adapter: Optional[dict] = None     # {presenter_url, listener_url?, timeout?}
    token: Optional[str] = None
    joined: bool = False


class Session:
    """One live game; strictly sequential, guarded by a lock."""

    def __init__(self, session_id: str, seed: int, bindings: dict[int, SeatBinding],
                 clock: Callable[[], float] = time.monotonic,
                 human_deadline: float = HUMAN_DEADLINE,
                 presenter_transport: Optional[Callable] = None):
        self.id = session_id
        self.seed = seed
        self.lock = threading.RLock()
        self.game = E.new_game(seed)
        self.bindings = bindings
        self.clock = clock
        self.human_deadline = human_deadline
        self.tape = SpeechTape()
        self.rng = np.random.default_rng(seed ^ 0xC0FFEE)
        self.fallback_rng = __import__("random").Random(seed ^ 0xFA11)
        self.streams: dict[int, list[dict]] = {s: [] for s in E.SEATS}
        self._streamed = 0
        self.deadline_at: Optional[float] = None
        self.deadline_seat: Optional[int] = None
        self.timed_out: list[dict] = []
        self.adapter_metrics: list[dict] = []
        self._presenter_transport = presenter_transport or _http_call
        self._roles = {s: self.game.state.seats[s].role for s in E.SEATS}
        self._flush_events()
        self.advance()

    # ----------------------------------------------------------- plumbing

    def _flush_events(self) -> None:
        log = self.game.state.event_log
        for ev in log[self._streamed:]:
            wire = ev.to_wire()
            for seat in E.SEATS:
                if event_visible_to(ev, seat, self._roles):
                    self.streams[seat].append(wire)
        self._streamed = len(log)

    def _human_pending(self) -> Optional[E.Decision]:
        for dec in self.game.pending():
            if self.bindings[dec.seat].kind == "human":
                return dec
        return None

    def advance(self) -> None:
        """Let AI seats act until a human must decide or the game ends."""
        with self.lock:
            while not self.game.over:
                pend = self.game.pending()
                if not pend:
                    break
                acted = False
                for dec in pend:
                    b = self.bindings[dec.seat]
                    if b.kind == "human":
                        continue
                    self._ai_act(dec, b)
                    acted = True
                    break  # pending set may have changed entirely
                self._flush_events()
                if not acted:
                    dec = self._human_pending()
                    if dec is not None and self.deadline_seat != dec.seat:
                        self.deadline_seat = dec.seat
                        self.deadline_at = self.clock() + self.human_deadline
                    break
            self._flush_events()
            if self.game.over:
                self.deadline_at = self.deadline_seat = None

    def _ai_act(self, dec: E.Decision, b: SeatBinding) -> None:
        obs = E.observe(self.game, dec.seat)
        if b.kind == "random":
            if dec.kind == DecisionType.SPEECH:
                self.game.submit_speech(dec.seat, None)
            else:
                opts = dec.options
                self.game.submit(dec.seat, opts[int(self.rng.integers(len(opts)))])
            return
        if b.kind == "scripted":
            from .training.scripted import ScriptedAgent
            agent = ScriptedAgent(dec.seat)
            if dec.kind == DecisionType.SPEECH:
                self.game.submit_speech(dec.seat, agent.speak(obs, dec))
            else:
                self.game.submit(dec.seat, agent.decide(obs, dec))
            return
        # thinker seat
        out = T.forward(b.params, obs, dec, self.tape)
        if dec.kind == DecisionType.SPEECH:
            cells, _ = T.sample_instruction(out, b.temperature, self.rng)
            inst = FeatureMatrix(dec.seat, dec.header, cells)
            if b.adapter:
                inst = self._adapter_speech(dec, b, obs, inst, out.identity)
            self.game.submit_speech(dec.seat, inst)
        else:
            idx, _ = T.sample_action(out, b.temperature, self.rng)
            self.game.submit(dec.seat, index_to_action(dec, idx))

    def _adapter_speech(self, dec, b: SeatBinding, obs, inst: FeatureMatrix,
                        identity_probs) -> FeatureMatrix:
        timeout = float(b.adapter.get("timeout", ADAPTER_TIMEOUT))
        metrics = self.adapter_metrics

        def presenter(instruction, obs_):
            t0 = time.monotonic()
            try:
                body = self._presenter_transport(
                    b.adapter["presenter_url"],
                    {"observation": observation_summary(obs_),
                     "instruction": instruction.to_wire()},
                    timeout)
                metrics.append({"seat": dec.seat, "seconds": time.monotonic() - t0,
                                "ok": True})
                return body["text"]
            except Exception:
                metrics.append({"seat": dec.seat, "seconds": time.monotonic() - t0,
                                "ok": False})
                raise

        listener = None
        if b.adapter.get("listener_url"):
            def listener(text, speaker, header):
                body = self._presenter_transport(
                    b.adapter["listener_url"],
                    {"text": text, "speaker": speaker,
                     "header": header.to_wire() if header else None},
                    timeout)
                return FeatureMatrix.from_wire(body["feature"])

        result = generate_with_retries(
            inst, presenter, MAX_SPEECH_ATTEMPTS, obs=obs,
            identity_probs=identity_probs, listener=listener)
        return result.instruction.with_speaker_header(dec.seat, dec.header)

    # --------------------------------------------------------- human API

    def check_deadline(self) -> None:
        with self.lock:
            if (self.deadline_at is None or self.game.over
                    or self.clock() < self.deadline_at):
                return
            dec = self._human_pending()
            if dec is None:
                self.deadline_at = self.deadline_seat = None
                return
            obs = E.observe(self.game, dec.seat)
            if dec.kind == DecisionType.SPEECH:
                inst = P.fallback_rule_speech(obs).with_speaker_header(dec.seat, dec.header)
                self.game.submit_speech(dec.seat, inst)
            else:
                opts = dec.options
                self.game.submit(dec.seat, opts[self.fallback_rng.randrange(len(opts))])
            self.timed_out.append({"seat": dec.seat, "kind": dec.kind.value,
                                   "day": self.game.state.day})
            self.deadline_at = self.deadline_seat = None
            self._flush_events()
            self.advance()

    def submit_human(self, seat: int, action: Optional[Action],
                     instruction: Optional[FeatureMatrix]) -> None:
        with self.lock:
            self.check_deadline()
            if self.game.over:
                raise IllegalSubmission("game is over", [])
            pend = {d.seat: d for d in self.game.pending()}
            dec = pend.get(seat)
            if dec is None:
                raise IllegalSubmission("seat is not due to act", [])
            if dec.kind == DecisionType.SPEECH:
                if instruction is None:
                    raise IllegalSubmission("a speech instruction is required", [])
                self.game.submit_speech(seat, instruction)
            else:
                if action is None or action not in dec.options:
                    raise IllegalSubmission(
                        "illegal action", [a.to_wire() for a in dec.options])
                self.game.submit(seat, action)
            self.deadline_at = self.deadline_seat = None
            self._flush_events()
            self.advance()

    def poll(self, seat: int, since: int) -> dict:
        with self.lock:
            self.check_deadline()
            events = self.streams[seat][since:]
            pend = {d.seat: d for d in self.game.pending()}
            dec = pend.get(seat)
            pending = None
            if dec is not None and self.bindings[seat].kind == "human":
                pending = {
                    "kind": dec.kind.value,
                    "options": [a.to_wire() for a in dec.options],
                    "shown_target": dec.shown_target,
                    "header": dec.header.to_wire() if dec.header else None,
                    "deadline_in": (None if self.deadline_at is None
                                    else max(self.deadline_at - self.clock(), 0.0)),
                }
            obs = E.observe(self.game, seat)
            return {
                "events": events,
                "next": since + len(events),
                "pending": pending,
                "game_over": self.game.over,
                "winner": self.game.winner.value if self.game.winner else None,
                "observation": observation_summary(obs),
            }

    def result(self) -> dict:
        with self.lock:
            self.check_deadline()
            if not self.game.over:
                return {"game_over": False}
            card_by_seat = {}
            from .arena import behavior_score_from_state
            card = behavior_score_from_state(self.game)
            for s in E.SEATS:
                card_by_seat[s] = {"total": card.total(s),
                                   "items": card.entries.get(s, [])}
            return {
                "game_over": True,
                "winner": self.game.winner.value,
                "roles": {s: self._roles[s].value for s in E.SEATS},
                "behavior_scores": card_by_seat,
                "timed_out": self.timed_out,
                "log": log_lines(self.game),
            }


class IllegalSubmission(Exception):
    def __init__(self, message: str, legal: list):
        super().__init__(message)
        self.legal = legal


def observation_summary(obs: E.Observation) -> dict:
    return {
        "viewer": obs.viewer,
        "day": obs.day,
        "phase": obs.phase.value,
        "role": obs.role.value,
        "alive": {str(s): bool(a) for s, a in obs.alive.items()},
        "teammates": list(obs.teammates),
        "revealed_roles": {str(s): r.value for s, r in obs.revealed_roles.items()},
        "announced_deaths": [[d, list(seats)] for d, seats in obs.announced_deaths],
        "votes": obs.votes,
        "exiles": [[d, s] for d, s in obs.exiles],
        "speeches": [fm.to_wire() for fm in obs.speeches],
        "seer_checks": [[t, bool(w)] for t, w in obs.seer_checks],
        "witch": {
            "antidote_used": obs.witch_antidote_used,
            "poison_used": obs.witch_poison_used,
            "known_targets": [[d, t] for d, t in obs.witch_known_targets],
            "saved": obs.witch_saved,
            "poisoned": obs.witch_poisoned,
        },
        "wolf_night_votes": [list(v) for v in obs.wolf_night_votes],
        "tied_candidates": list(obs.tied_candidates),
        "winner": obs.winner.value if obs.winner else None,
    }


def log_lines(game: E.Game) -> list[str]:
    import io
    buf = io.StringIO()
    E.write_log(game, buf)
    return buf.getvalue().splitlines()


def _http_call(url: str, payload: dict, timeout: float) -> dict:
    import httpx
    resp = httpx.post(url, json=payload, timeout=timeout)
    resp.raise_for_status()
    return resp.json()


# ------------------------------------------------------------------- app

class SeatSpec(BaseModel):
    kind: str
    checkpoint: Optional[str] = None
    temperature: float = 0.5
    adapter: Optional[dict] = None


class CreateSession(BaseModel):
    seats: list[SeatSpec]
    seed: Optional[int] = None
    human_deadline: Optional[float] = None


class JoinBody(BaseModel):
    seat: int


class ActionBody(BaseModel):
    token: str
    action: dict


class SpeechBody(BaseModel):
    token: str
    instruction: dict


class RenderBody(BaseModel):
    instruction: dict


def build_binding(spec: SeatSpec, defaults: dict) -> SeatBinding:
    kind = spec.kind
    if kind not in ("thinker", "random", "scripted", "human"):
        raise HTTPException(400, f"unknown seat kind {kind!r}")
    params = None
    if kind == "thinker":
        path = spec.checkpoint or defaults.get("checkpoint")
        if path:
            params = ThinkerParams.load(path)
        else:
            params = defaults.setdefault(
                "_fresh_params", ThinkerParams(T.ThinkerConfig(seed=7)))
    return SeatBinding(kind=kind, params=params, temperature=spec.temperature,
                       adapter=spec.adapter)


def create_app(defaults: Optional[dict] = None,
               clock: Callable[[], float] = time.monotonic,
               presenter_transport: Optional[Callable] = None) -> FastAPI:
    defaults = defaults or {}
    app = FastAPI(title="werewolf9")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    def get_session(sid: str) -> Session:
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, "no such session")
        return sess

    def auth(sess: Session, seat: int, token: str) -> None:
        b = sess.bindings.get(seat)
        if b is None or b.token is None or b.token != token:
            raise HTTPException(401, "bad seat token")

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.post("/sessions")
    def create_session(body: CreateSession):
        if len(body.seats) != 9:
            raise HTTPException(400, "exactly nine seat specs required")
        seed = body.seed if body.seed is not None else int(time.time() * 1000) % (1 << 48)
        bindings = {s: build_binding(body.seats[s - 1], defaults) for s in E.SEATS}
        sid = uuid.uuid4().hex[:12]
        sess = Session(sid, seed, bindings, clock=clock,
                       human_deadline=body.human_deadline or
                       defaults.get("human_deadline", HUMAN_DEADLINE),
                       presenter_transport=presenter_transport)
        sessions[sid] = sess
        return {"session_id": sid, "seed": seed,
                "seats": [{"seat": s, "kind": bindings[s].kind} for s in E.SEATS]}

    @app.post("/sessions/{sid}/join")
    def join(sid: str, body: JoinBody):
        sess = get_session(sid)
        with sess.lock:
            b = sess.bindings.get(body.seat)
            if b is None:
                raise HTTPException(400, "no such seat")
            if b.kind != "human":
                raise HTTPException(409, "seat is not a human seat")
            if b.joined:
                raise HTTPException(409, "seat already joined")
            b.token = uuid.uuid4().hex
            b.joined = True
            me = sess._roles[body.seat]
            return {"token": b.token, "seat": body.seat, "role": me.value,
                    "teammates": [s for s in E.SEATS
                                  if me == Role.WEREWOLF and s != body.seat
                                  and sess._roles[s] == Role.WEREWOLF]}

    @app.get("/sessions/{sid}/seats/{seat}/events")
    def events(sid: str, seat: int, token: str = Query(...),
               since: int = Query(0), wait: float = Query(0.0)):
        sess = get_session(sid)
        auth(sess, seat, token)
        deadline = time.monotonic() + min(wait, 25.0)
        while True:
            out = sess.poll(seat, since)
            if out["events"] or out["pending"] or out["game_over"]:
                return out
            if time.monotonic() >= deadline:
                return out
            time.sleep(0.05)

    @app.post("/sessions/{sid}/seats/{seat}/action")
    def action(sid: str, seat: int, body: ActionBody):
        sess = get_session(sid)
        auth(sess, seat, body.token)
        try:
            act = Action.from_wire(body.action)
        except (KeyError, TypeError) as exc:
            raise HTTPException(400, f"malformed action: {exc}")
        try:
            sess.submit_human(seat, act, None)
        except IllegalSubmission as exc:
            raise HTTPException(409, detail={"error": str(exc), "legal": exc.legal})
        return {"ok": True}

    @app.post("/sessions/{sid}/seats/{seat}/speech")
    def speech(sid: str, seat: int, body: SpeechBody):
        sess = get_session(sid)
        auth(sess, seat, body.token)
        try:
            inst = FeatureMatrix.from_wire(body.instruction)
        except Exception as exc:
            raise HTTPException(400, f"malformed instruction: {exc}")
        try:
            sess.submit_human(seat, None, inst)
        except IllegalSubmission as exc:
            raise HTTPException(409, detail={"error": str(exc), "legal": exc.legal})
        return {"ok": True}

    @app.get("/sessions/{sid}/result")
    def result(sid: str):
        return get_session(sid).result()

    @app.post("/render")
    def render_preview(body: RenderBody):
        try:
            inst = FeatureMatrix.from_wire(body.instruction)
        except Exception as exc:
            raise HTTPException(400, f"malformed instruction: {exc}")
        return {"text": render(inst)}

    @app.post("/parse")
    def parse_text(body: dict = Body(...)):
        try:
            fm = parse(str(body.get("text", "")), int(body.get("speaker", 1)))
        except P.ParseError as exc:
            raise HTTPException(400, f"parse error at byte {exc.offset}")
        return {"feature": fm.to_wire()}

    return app
