"""Reward shaping over a finished game's event log.

Outcome, action, speech, consistency, and cognition components.  Every value
is configurable; defaults follow the shaping table.  Each seat gets a list
of (event_index, amount, reason) triples so totals stay auditable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import engine as E
from ..engine import Role, Winner
from ..protocol import Attribute, FeatureMatrix, Modality

GOOD_SELF_CLAIMS = (Attribute.GOOD, Attribute.VILLAGER, Attribute.SEER,
                    Attribute.WITCH, Attribute.HUNTER, Attribute.GOLD_WATER,
                    Attribute.SPECIAL_ROLE)


@dataclass
class RewardConfig:
    # game outcome
    win_wolf: float = 4.0
    lose_wolf: float = -4.0
    win_good: float = 2.0
    lose_good: float = -2.0
    survive_day: float = 1.0
    # actions
    vote_wolf: float = 2.0
    vote_good: float = -2.0
    poison_wolf: float = 2.0
    poison_good: float = -4.0
    shoot_wolf: float = 2.0
    shoot_good: float = -4.0
    # speech
    seer_claim: float = 2.0
    witch_claim: float = 1.0
    identify_wolf_right: float = 2.0
    identify_wolf_wrong: float = -2.0
    identify_good_right: float = 1.0
    identify_good_wrong: float = -1.0
    claim_good: float = 0.5
    # action-speech consistency
    seer_report: float = 2.0
    witch_report: float = 1.0
    vote_as_declared: float = 1.0
    # cognition weights by observing good seat's role
    cog_weight_seer: float = 4.0
    cog_weight_witch: float = 2.0
    cog_weight_other: float = 1.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "RewardConfig":
        cfg = RewardConfig()
        for k, v in d.items():
            if not hasattr(cfg, k):
                raise ValueError(f"unknown reward field {k!r}")
            setattr(cfg, k, float(v))
        return cfg

    def cog_weight(self, role: Role) -> float:
        if role == Role.SEER:
            return self.cog_weight_seer
        if role == Role.WITCH:
            return self.cog_weight_witch
        return self.cog_weight_other


@dataclass
class RewardEvent:
    event_index: int
    amount: float
    reason: str


def _is_wolf(roles, seat) -> bool:
    return roles[seat] == Role.WEREWOLF


def shape_rewards(roles: dict[int, Role], events: list[E.GameEvent],
                  cfg: Optional[RewardConfig] = None,
                  cognition_traces: Optional[dict[int, dict[int, tuple[float, float]]]] = None,
                  ) -> dict[int, list[RewardEvent]]:
    """Per-seat shaped rewards from a complete event log.

    `cognition_traces[event_index][good_seat] = (pre, post)` carries each
    living good seat's predicted werewolf probability for the speaker just
    before and after a wolf's speech; omitted speeches earn no cognition
    reward.
    """
    cfg = cfg or RewardConfig()
    out: dict[int, list[RewardEvent]] = {s: [] for s in E.SEATS}

    def add(seat, idx, amount, reason):
        if amount:
            out[seat].append(RewardEvent(idx, float(amount), reason))

    alive = {s: True for s in E.SEATS}
    # last vote intention declared in speech, per seat per day
    declared_vote: dict[int, tuple[int, int]] = {}   # seat -> (day, target)
    checks_by_day: dict[int, tuple[int, bool]] = {}  # the seer's (target, is_wolf)
    witch_last_act: Optional[tuple[str, int]] = None

    for idx, ev in enumerate(events):
        kind, day, data = ev.kind, ev.day, ev.data
        if kind == E.EV_SEER_CHECK:
            checks_by_day[day] = (data["target"], data["is_werewolf"])
        elif kind == E.EV_WITCH_ACT:
            if data["choice"] in ("save", "poison"):
                witch_last_act = (data["choice"], data["target"])
            if data["choice"] == "poison":
                witch = next(s for s in E.SEATS if roles[s] == Role.WITCH)
                hit_wolf = _is_wolf(roles, data["target"])
                add(witch, idx, cfg.poison_wolf if hit_wolf else cfg.poison_good,
                    "poison_wolf" if hit_wolf else "poison_good")
        elif kind == E.EV_DEATH_ANNOUNCE:
            for s in data["seats"]:
                alive[s] = False
            if day >= 2:
                for s in E.SEATS:
                    if alive[s]:
                        add(s, idx, cfg.survive_day, "survive_day")
        elif kind in (E.EV_SPEECH, E.EV_LAST_WORDS):
            speaker = data["seat"]
            inst = FeatureMatrix.from_wire(data["instruction"])
            # "last night" is this day's night: only that check earns the
            # consistency reward
            _speech_rewards(cfg, roles, speaker, inst, idx, day, add,
                            checks_by_day.get(day), witch_last_act)
            vote_targets = [s for s, a, m in inst.mentioned()
                            if a == Attribute.VOTE and m == Modality.IS]
            if vote_targets:
                declared_vote[speaker] = (day, vote_targets[-1])
            if cognition_traces and _is_wolf(roles, speaker) and idx in cognition_traces:
                total = 0.0
                for g_seat, (pre, post) in cognition_traces[idx].items():
                    total += cfg.cog_weight(roles[g_seat]) * (pre - post)
                add(speaker, idx, total, "cognition")
        elif kind == E.EV_VOTE:
            voter, target = data["voter"], data["target"]
            if target is not None and not _is_wolf(roles, voter):
                hit = _is_wolf(roles, target)
                add(voter, idx, cfg.vote_wolf if hit else cfg.vote_good,
                    "vote_wolf" if hit else "vote_good")
            dv = declared_vote.get(voter)
            if target is not None and dv is not None and dv == (day, target):
                add(voter, idx, cfg.vote_as_declared, "vote_as_declared")
        elif kind == E.EV_EXILE:
            if data["seat"] is not None:
                alive[data["seat"]] = False
        elif kind == E.EV_SUICIDE:
            alive[data["seat"]] = False
        elif kind == E.EV_HUNTER_SHOT:
            target = data["target"]
            if target is not None:
                alive[target] = False
                hit = _is_wolf(roles, target)
                add(data["shooter"], idx, cfg.shoot_wolf if hit else cfg.shoot_good,
                    "shoot_wolf" if hit else "shoot_good")
        elif kind == E.EV_GAME_OVER:
            wolves_won = Winner(data["winner"]) == Winner.WEREWOLVES
            for s in E.SEATS:
                if _is_wolf(roles, s):
                    add(s, idx, cfg.win_wolf if wolves_won else cfg.lose_wolf, "outcome")
                else:
                    add(s, idx, cfg.lose_good if wolves_won else cfg.win_good, "outcome")
    return out


def _speech_rewards(cfg, roles, speaker, inst, idx, day, add, last_check, witch_last_act):
    role = roles[speaker]
    is_good = role != Role.WEREWOLF
    if role == Role.SEER and inst.get(speaker, Attribute.SEER) == Modality.IS:
        add(speaker, idx, cfg.seer_claim, "seer_claim")
    if role == Role.WITCH and inst.get(speaker, Attribute.WITCH) == Modality.IS:
        add(speaker, idx, cfg.witch_claim, "witch_claim")
    if is_good:
        for seat, attr, mod in inst.mentioned():
            if seat == speaker or mod != Modality.IS:
                continue
            if attr == Attribute.WEREWOLF:
                right = _is_wolf(roles, seat)
                add(speaker, idx,
                    cfg.identify_wolf_right if right else cfg.identify_wolf_wrong,
                    "identify_wolf_right" if right else "identify_wolf_wrong")
            elif attr == Attribute.GOOD:
                right = not _is_wolf(roles, seat)
                add(speaker, idx,
                    cfg.identify_good_right if right else cfg.identify_good_wrong,
                    "identify_good_right" if right else "identify_good_wrong")
    if any(inst.get(speaker, a) == Modality.IS for a in GOOD_SELF_CLAIMS):
        add(speaker, idx, cfg.claim_good, "claim_good")
    if role == Role.SEER and last_check is not None:
        target, is_wolf = last_check
        reported = inst.get(target, Attribute.CHECK) == Modality.IS
        result_ok = (inst.get(target, Attribute.WEREWOLF) == Modality.IS if is_wolf
                     else inst.get(target, Attribute.GOLD_WATER) == Modality.IS
                     or inst.get(target, Attribute.GOOD) == Modality.IS)
        if reported and result_ok:
            add(speaker, idx, cfg.seer_report, "seer_report")
    if role == Role.WITCH and witch_last_act is not None:
        choice, target = witch_last_act
        if choice == "save" and (inst.get(target, Attribute.SAVE) == Modality.IS
                                 or inst.get(target, Attribute.SILVER_WATER) == Modality.IS):
            add(speaker, idx, cfg.witch_report, "witch_report")
        elif choice == "poison" and inst.get(target, Attribute.POISON) == Modality.IS:
            add(speaker, idx, cfg.witch_report, "witch_report")


def outcome_totals(roles: dict[int, Role], events: list[E.GameEvent],
                   cfg: Optional[RewardConfig] = None) -> float:
    """Independent audit: what the outcome + survival components must sum to."""
    cfg = cfg or RewardConfig()
    winner = None
    alive = {s: True for s in E.SEATS}
    survive_total = 0.0
    for ev in events:
        if ev.kind == E.EV_DEATH_ANNOUNCE:
            for s in ev.data["seats"]:
                alive[s] = False
            if ev.day >= 2:
                survive_total += cfg.survive_day * sum(alive.values())
        elif ev.kind == E.EV_EXILE and ev.data["seat"] is not None:
            alive[ev.data["seat"]] = False
        elif ev.kind == E.EV_SUICIDE:
            alive[ev.data["seat"]] = False
        elif ev.kind == E.EV_HUNTER_SHOT and ev.data["target"] is not None:
            alive[ev.data["target"]] = False
        elif ev.kind == E.EV_GAME_OVER:
            winner = Winner(ev.data["winner"])
    if winner is None:
        raise ValueError("log has no game_over event")
    if winner == Winner.WEREWOLVES:
        return 3 * cfg.win_wolf + 6 * cfg.lose_good + survive_total
    return 3 * cfg.lose_wolf + 6 * cfg.win_good + survive_total
