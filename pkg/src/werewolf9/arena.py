"""Match running and evaluation: win rates, Behavior Score, deduction accuracy."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import engine as E
from .engine import Action, DecisionType, Role, Winner
from .protocol import FeatureMatrix
from .policy import thinker as T
from .policy.features import ROLE_INDEX, SpeechTape, index_to_action
from .policy.thinker import ThinkerParams

GOOD_EXCEPT_SEER = (Role.WITCH, Role.HUNTER, Role.VILLAGER)
SPECIALS = (Role.SEER, Role.WITCH, Role.HUNTER)
VOTE_BASELINE = 3 / 8
ID_BASELINE = 1 / 8


@dataclass(frozen=True)
class AgentSpec:
    """How to fill one seat: thinker checkpoint, scripted policy, or random."""

    kind: str                      # thinker | scripted | random | remote
    checkpoint: Optional[object] = None   # path or ThinkerParams for thinker
    temperature: float = 0.5
    name: str = ""

    def label(self) -> str:
        return self.name or self.kind

    def build(self, seat: int, tape: SpeechTape, rng: np.random.Generator):
        if self.kind == "random":
            return RandomSeat(seat, rng)
        if self.kind == "scripted":
            from .training.scripted import ScriptedAgent
            return ScriptedSeat(seat, ScriptedAgent(seat))
        if self.kind == "thinker":
            params = self.checkpoint
            if not isinstance(params, ThinkerParams):
                params = ThinkerParams.load(params)
            return ThinkerSeat(seat, params, tape, self.temperature, rng)
        raise ValueError(f"agent kind {self.kind!r} cannot play offline matches")


class RandomSeat:
    def __init__(self, seat: int, rng: np.random.Generator):
        self.seat = seat
        self.rng = rng

    def decide(self, obs, dec) -> Action:
        return dec.options[int(self.rng.integers(len(dec.options)))]

    def speak(self, obs, dec) -> Optional[FeatureMatrix]:
        return None

    def identity(self, obs):
        return None


class ScriptedSeat:
    def __init__(self, seat: int, agent):
        self.seat = seat
        self.agent = agent

    def decide(self, obs, dec) -> Action:
        return self.agent.decide(obs, dec)

    def speak(self, obs, dec) -> Optional[FeatureMatrix]:
        return self.agent.speak(obs, dec)

    def identity(self, obs):
        return None


class ThinkerSeat:
    def __init__(self, seat: int, params: ThinkerParams, tape: SpeechTape,
                 temperature: float, rng: np.random.Generator):
        self.seat = seat
        self.params = params
        self.tape = tape
        self.temperature = temperature
        self.rng = rng

    def decide(self, obs, dec) -> Action:
        out = T.forward(self.params, obs, dec, self.tape)
        idx, _ = T.sample_action(out, self.temperature, self.rng)
        return index_to_action(dec, idx)

    def speak(self, obs, dec) -> FeatureMatrix:
        out = T.forward(self.params, obs, dec, self.tape)
        cells, _ = T.sample_instruction(out, self.temperature, self.rng)
        return FeatureMatrix(self.seat, dec.header, cells)

    def identity(self, obs) -> np.ndarray:
        snap = T.ObsSnapshot.capture(obs, self.tape, None)
        cache = T.trunk_forward(self.params, T.BatchInputs([snap]))
        logits, _ = T.identity_forward(self.params, cache.player_emb, cache.g)
        from .policy.nets import softmax
        return softmax(logits[0], axis=-1)


# --------------------------------------------------------------- reports

@dataclass
class MatchReport:
    games: int = 0
    win_rate: float = 0.0
    win_rate_by_role: dict = field(default_factory=dict)
    behavior_score_by_role: dict = field(default_factory=dict)
    vote_accuracy_by_day: dict = field(default_factory=dict)
    id_accuracy_by_day: dict = field(default_factory=dict)
    goods_win_rate: float = 0.0
    wolves_win_rate: float = 0.0
    illegal_substitutions: int = 0
    half_width: float = 0.0
    pool_stats: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "games": self.games,
            "win_rate": self.win_rate,
            "half_width": self.half_width,
            "goods_win_rate": self.goods_win_rate,
            "wolves_win_rate": self.wolves_win_rate,
            "win_rate_by_role": self.win_rate_by_role,
            "behavior_score_by_role": self.behavior_score_by_role,
            "vote_accuracy_by_day": self.vote_accuracy_by_day,
            "id_accuracy_by_day": self.id_accuracy_by_day,
            "illegal_substitutions": self.illegal_substitutions,
            "pool_stats": self.pool_stats,
        }

    def table(self) -> str:
        """Win rate | Behavior Score per role, one row per pool/method."""
        cols = ["total", "seer", "witch", "hunter", "villager", "werewolf"]
        header = "method     " + "".join(f"{c:>18}" for c in cols)
        rows = [header]

        def fmt(win, bs):
            b = "  --  " if bs is None else f"{bs:+.2f}"
            return f"{100 * win:5.1f}% | {b}"

        def row(label, stats):
            cells = [fmt(stats["win_rate"], None)]
            for role in ("seer", "witch", "hunter", "villager", "werewolf"):
                wr = stats["win_rate_by_role"].get(role, 0.0)
                bs = stats["behavior_score_by_role"].get(role)
                cells.append(fmt(wr, bs))
            return f"{label:<11}" + "".join(f"{c:>18}" for c in cells)

        if self.pool_stats:
            for label, stats in self.pool_stats.items():
                rows.append(row(label, stats))
        else:
            rows.append(row("all", {
                "win_rate": self.win_rate,
                "win_rate_by_role": self.win_rate_by_role,
                "behavior_score_by_role": self.behavior_score_by_role,
            }))
        return "\n".join(rows)


def _half_width(p: float, n: int) -> float:
    if n == 0:
        return 0.0
    return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / n)


# ------------------------------------------------------------ the runner

def _play_one(agents: dict[int, object], game_seed: int,
              sub_rng: random.Random) -> tuple[E.Game, int, list[dict]]:
    """Run one full game; illegal agent choices fall back to seeded legal picks.

    Returns (game, n_substitutions, villager first-vote records)."""
    game = E.new_game(game_seed)
    subs = 0
    deductions = []
    roles = {s: game.state.seats[s].role for s in E.SEATS}
    seen_vote_keys = set()
    while not game.over:
        for dec in list(game.pending()):
            agent = agents[dec.seat]
            obs = E.observe(game, dec.seat)
            if dec.kind == DecisionType.SPEECH:
                inst = agent.speak(obs, dec)
                game.submit_speech(dec.seat, inst)
                continue
            act = agent.decide(obs, dec)
            if act not in dec.options:
                subs += 1
                act = dec.options[sub_rng.randrange(len(dec.options))]
            if (dec.kind == DecisionType.VOTE and game.state.vote_round == 1
                    and roles[dec.seat] == Role.VILLAGER
                    and (game.state.day, dec.seat) not in seen_vote_keys):
                seen_vote_keys.add((game.state.day, dec.seat))
                living_wolves = {s for s in game.state.living()
                                 if roles[s] == Role.WEREWOLF}
                rec = {"day": game.state.day,
                       "vote_hit": act.kind == "vote" and act.target in living_wolves}
                probs = agent.identity(obs)
                if probs is not None:
                    for role in SPECIALS:
                        col = ROLE_INDEX[role]
                        others = [s for s in E.SEATS if s != dec.seat]
                        guess = max(others, key=lambda s: probs[s - 1, col])
                        rec[f"id_{role.value}"] = roles[guess] == role
                deductions.append(rec)
            game.submit(dec.seat, act)
    return game, subs, deductions


def _aggregate(games_data, report: MatchReport) -> None:
    n_seat_obs = 0
    n_seat_wins = 0
    by_role_wins = {r.value: [0, 0] for r in Role}
    bs_by_role = {r.value: [] for r in Role}
    vote_by_day: dict[int, list[int]] = {}
    id_by_day: dict[int, dict[str, list[int]]] = {}
    goods = wolves = 0
    for game, subs, deductions in games_data:
        report.illegal_substitutions += subs
        roles = {s: game.state.seats[s].role for s in E.SEATS}
        wolves_won = game.winner == Winner.WEREWOLVES
        goods += (not wolves_won)
        wolves += wolves_won
        card = behavior_score_from_state(game)
        for s in E.SEATS:
            role = roles[s]
            won = wolves_won if role == Role.WEREWOLF else not wolves_won
            n_seat_obs += 1
            n_seat_wins += won
            by_role_wins[role.value][0] += won
            by_role_wins[role.value][1] += 1
            bs_by_role[role.value].append(card.total(s))
        for rec in deductions:
            day = rec["day"]
            vote_by_day.setdefault(day, []).append(rec["vote_hit"])
            for key in ("id_seer", "id_witch", "id_hunter"):
                if key in rec:
                    id_by_day.setdefault(day, {}).setdefault(key, []).append(rec[key])
    n = len(games_data)
    report.games = n
    if n == 0:
        return
    report.goods_win_rate = goods / n
    report.wolves_win_rate = wolves / n
    report.win_rate = n_seat_wins / max(n_seat_obs, 1)
    report.half_width = _half_width(report.win_rate, n_seat_obs)
    report.win_rate_by_role = {
        r: wins / max(total, 1) for r, (wins, total) in by_role_wins.items()}
    report.behavior_score_by_role = {
        r: float(np.mean(v)) if v else 0.0 for r, v in bs_by_role.items()}
    report.vote_accuracy_by_day = {
        d: float(np.mean(v)) for d, v in sorted(vote_by_day.items())}
    report.id_accuracy_by_day = {
        d: {k: float(np.mean(v)) for k, v in cols.items()}
        for d, cols in sorted(id_by_day.items())}


def play_match(seat_pools: list[list[AgentSpec]], n_games: int,
               seed: int) -> MatchReport:
    """Each seat draws an agent uniformly from its pool, per game."""
    if len(seat_pools) != 9 or any(not p for p in seat_pools):
        raise ValueError("need nine non-empty seat pools")
    report = MatchReport()
    rng = random.Random(seed)
    games_data = []
    for _ in range(n_games):
        game_seed = rng.getrandbits(48)
        nprng = np.random.default_rng(rng.getrandbits(48))
        tape = SpeechTape()
        agents = {s: rng.choice(seat_pools[s - 1]).build(s, tape, nprng)
                  for s in E.SEATS}
        games_data.append(_play_one(agents, game_seed, rng))
    _aggregate(games_data, report)
    return report


def play_faction_match(good_spec: AgentSpec, wolf_spec: AgentSpec,
                       n_games: int, seed: int) -> MatchReport:
    """Agents assigned by dealt faction: trained goods vs frozen wolves etc."""
    report = MatchReport()
    rng = random.Random(seed)
    games_data = []
    for _ in range(n_games):
        game_seed = rng.getrandbits(48)
        nprng = np.random.default_rng(rng.getrandbits(48))
        probe = E.new_game(game_seed)
        roles = {s: probe.state.seats[s].role for s in E.SEATS}
        tape = SpeechTape()
        agents = {
            s: (wolf_spec if roles[s] == Role.WEREWOLF else good_spec
                ).build(s, tape, nprng)
            for s in E.SEATS
        }
        games_data.append(_play_one(agents, game_seed, rng))
    _aggregate(games_data, report)
    return report


def head_to_head(pool_a: list[AgentSpec], pool_b: list[AgentSpec],
                 composition: tuple[int, int], n_games: int,
                 seed: int) -> MatchReport:
    """Mixed-table match: composition = (seats for A, seats for B)."""
    n_a, n_b = composition
    if n_a + n_b != 9:
        raise ValueError("composition must fill exactly nine seats")
    report = MatchReport()
    rng = random.Random(seed)
    games_data = []
    assignment_log = []
    for _ in range(n_games):
        game_seed = rng.getrandbits(48)
        nprng = np.random.default_rng(rng.getrandbits(48))
        seats = list(E.SEATS)
        rng.shuffle(seats)
        # the smaller pool takes the head of the shuffle, so swapping the
        # pool labels reproduces the same games with roles exchanged
        if n_a <= n_b:
            a_seats = set(seats[:n_a])
        else:
            a_seats = set(seats[n_b:])
        tape = SpeechTape()
        agents = {}
        for s in E.SEATS:
            spec = rng.choice(pool_a) if s in a_seats else rng.choice(pool_b)
            agents[s] = spec.build(s, tape, nprng)
        assignment_log.append(a_seats)
        games_data.append(_play_one(agents, game_seed, rng))
    _aggregate(games_data, report)
    for label, seat_sets in (("a", assignment_log),
                             ("b", [set(E.SEATS) - s for s in assignment_log])):
        wins = 0
        total = 0
        role_wins = {r.value: [0, 0] for r in Role}
        bs = {r.value: [] for r in Role}
        for (game, _, _), seat_set in zip(games_data, seat_sets):
            roles = {s: game.state.seats[s].role for s in E.SEATS}
            wolves_won = game.winner == Winner.WEREWOLVES
            card = behavior_score_from_state(game)
            for s in seat_set:
                won = wolves_won if roles[s] == Role.WEREWOLF else not wolves_won
                wins += won
                total += 1
                role_wins[roles[s].value][0] += won
                role_wins[roles[s].value][1] += 1
                bs[roles[s].value].append(card.total(s))
        report.pool_stats[label] = {
            "seats": total,
            "win_rate": wins / max(total, 1),
            "half_width": _half_width(wins / max(total, 1), total),
            "win_rate_by_role": {r: w / max(t, 1) for r, (w, t) in role_wins.items()},
            "behavior_score_by_role": {r: float(np.mean(v)) if v else 0.0
                                       for r, v in bs.items()},
        }
    return report


# -------------------------------------------------------- behavior score

@dataclass
class BehaviorScoreCard:
    """Per-seat itemized skill-quality score; werewolves are never scored."""

    entries: dict[int, list[tuple[str, float]]] = field(default_factory=dict)

    def add(self, seat: int, reason: str, delta: float) -> None:
        self.entries.setdefault(seat, []).append((reason, delta))

    def total(self, seat: int) -> float:
        return sum(d for _, d in self.entries.get(seat, ()))

    def totals(self) -> dict[int, float]:
        return {s: self.total(s) for s in E.SEATS}


def behavior_score(log: E.ReplayLog) -> BehaviorScoreCard:
    return _behavior_score(log.roles, log.events)


def behavior_score_from_state(game: E.Game) -> BehaviorScoreCard:
    roles = {s: game.state.seats[s].role for s in E.SEATS}
    return _behavior_score(roles, game.state.event_log)


def _behavior_score(roles: dict[int, Role], events: list[E.GameEvent]) -> BehaviorScoreCard:
    if sorted(r.value for r in roles.values()) != sorted(r.value for r in E.ROLE_DECK):
        raise ValueError("malformed log: bad role assignment")
    card = BehaviorScoreCard()
    seer = next(s for s, r in roles.items() if r == Role.SEER)
    alive = {s: True for s in E.SEATS}
    nights_started: set[int] = set()
    seer_alive_at_night: dict[int, bool] = {}
    checked_nights: set[int] = set()

    def is_wolf(seat):
        return roles[seat] == Role.WEREWOLF

    for ev in events:
        kind, day, data = ev.kind, ev.day, ev.data
        if kind == E.EV_NIGHT_KILL_VOTE and day not in nights_started:
            nights_started.add(day)
            seer_alive_at_night[day] = alive[seer]
        elif kind == E.EV_SEER_CHECK:
            checked_nights.add(day)
        elif kind == E.EV_WITCH_ACT and data["choice"] == "poison":
            witch = next(s for s, r in roles.items() if r == Role.WITCH)
            if is_wolf(data["target"]):
                card.add(witch, "poison_werewolf", 1.0)
            else:
                card.add(witch, "poison_good", -1.0)
        elif kind == E.EV_HUNTER_SHOT and data["target"] is not None:
            if is_wolf(data["target"]):
                card.add(data["shooter"], "shoot_werewolf", 1.0)
            else:
                card.add(data["shooter"], "shoot_good", -1.0)
            alive[data["target"]] = False
        elif kind == E.EV_VOTE and data["target"] is not None:
            voter = data["voter"]
            if roles[voter] in GOOD_EXCEPT_SEER:
                if is_wolf(data["target"]):
                    card.add(voter, "vote_werewolf", 0.5)
                else:
                    card.add(voter, "vote_good", -0.5)
        elif kind == E.EV_EXILE and data["seat"] is not None:
            if day == 1 and is_wolf(data["seat"]):
                card.add(seer, "werewolf_exiled_day_one", 0.5)
            alive[data["seat"]] = False
        elif kind == E.EV_DEATH_ANNOUNCE:
            for s in data["seats"]:
                alive[s] = False
        elif kind == E.EV_SUICIDE:
            alive[data["seat"]] = False
    for day in nights_started:
        if seer_alive_at_night.get(day) and day not in checked_nights:
            card.add(seer, "skipped_inspection", -0.5)
    for s in E.SEATS:
        if is_wolf(s):
            card.entries[s] = []
    return card


# ------------------------------------------------------- deduction eval

def deduction_eval(params_or_agent, replay_logs, *,
                   limit_points: Optional[int] = None) -> dict:
    """Villager-perspective accuracy at every first-round-vote decision point.

    For each such point in the replays, asks the agent for a vote (argmax) and
    for identity predictions; scores wolf-vote hits and special-role
    identification against the logged ground truth.
    """
    records: list[dict] = []

    def eval_log(log: E.ReplayLog):
        roles = log.roles
        tape = SpeechTape()

        def on_decision(game: E.Game, dec, act):
            if (dec.kind != DecisionType.VOTE or game.state.vote_round != 1
                    or roles[dec.seat] != Role.VILLAGER):
                return
            if limit_points is not None and len(records) >= limit_points:
                return
            obs = E.observe(game, dec.seat)
            rec = {"day": game.state.day}
            living_wolves = {s for s in game.state.living() if roles[s] == Role.WEREWOLF}
            if isinstance(params_or_agent, ThinkerParams):
                out = T.forward(params_or_agent, obs, dec, tape)
                idx = int(np.argmax(out.action_logits))
                choice = index_to_action(dec, idx)
                probs = out.identity
                rec["vote_hit"] = choice.kind == "vote" and choice.target in living_wolves
                for role in SPECIALS:
                    col = ROLE_INDEX[role]
                    others = [s for s in E.SEATS if s != dec.seat]
                    guess = max(others, key=lambda s: probs[s - 1, col])
                    rec[f"id_{role.value}"] = roles[guess] == role
            else:
                choice, probs = params_or_agent(obs, dec)
                rec["vote_hit"] = (choice is not None and choice.kind == "vote"
                                   and choice.target in living_wolves)
                if probs is not None:
                    for role in SPECIALS:
                        col = ROLE_INDEX[role]
                        others = [s for s in E.SEATS if s != dec.seat]
                        guess = max(others, key=lambda s: probs[s - 1, col])
                        rec[f"id_{role.value}"] = roles[guess] == role
            records.append(rec)

        E.drive_from_log(log, on_decision=on_decision)

    for log in replay_logs:
        if not isinstance(log, E.ReplayLog):
            with open(log) as fp:
                log = E.read_log(fp)
        try:
            eval_log(log)
        except E.ReplayMismatch:
            continue
        if limit_points is not None and len(records) >= limit_points:
            break

    table: dict = {"n": len(records), "baseline_vote": VOTE_BASELINE,
                   "baseline_id": ID_BASELINE, "by_day": {}}
    if not records:
        return table
    table["vote_accuracy"] = float(np.mean([r["vote_hit"] for r in records]))
    for key in ("id_seer", "id_witch", "id_hunter"):
        vals = [r[key] for r in records if key in r]
        if vals:
            table[key] = float(np.mean(vals))
    days = sorted({r["day"] for r in records})
    for d in days:
        sub = [r for r in records if r["day"] == d]
        entry = {"n": len(sub),
                 "vote_accuracy": float(np.mean([r["vote_hit"] for r in sub]))}
        for key in ("id_seer", "id_witch", "id_hunter"):
            vals = [r[key] for r in sub if key in r]
            if vals:
                entry[key] = float(np.mean(vals))
        table["by_day"][d] = entry
    return table
