"""Deterministic scripted players and the synthetic replay dataset.

Every choice is a pure function of the seat's own observation, so cloned
policies can in principle match them exactly.  The truthful seer reports
checks, the witch saves on night one and poisons pile-on suspects, wolves
claim villager and never self-destruct.
"""
from __future__ import annotations

import os
import random
from pathlib import Path
from typing import Optional

from .. import engine as E
from ..engine import Action, Decision, DecisionType, Observation, Role
from ..protocol import Attribute, FeatureMatrix, Modality, SpeechInstruction


SEER_CLAIM_WEIGHT = 4.0


def seer_claimants_of(obs: Observation) -> set[int]:
    return {fm.speaker for fm in obs.speeches
            if fm.get(fm.speaker, Attribute.SEER) == Modality.IS}


def accusation_scores(obs: Observation) -> dict[int, float]:
    """Pile-on heuristic: who looks like a wolf from the public speeches.

    Werewolf claims add (seer claimants weigh extra), good/gold-water claims
    subtract.
    """
    seer_claimants = seer_claimants_of(obs)
    score = {s: 0.0 for s in E.SEATS}
    for fm in obs.speeches:
        w = SEER_CLAIM_WEIGHT if fm.speaker in seer_claimants else 1.0
        for seat, attr, mod in fm.mentioned():
            if seat == fm.speaker:
                continue
            if attr == Attribute.WEREWOLF and mod == Modality.IS:
                score[seat] += w
            elif attr == Attribute.WEREWOLF and mod == Modality.MIGHT_BE:
                score[seat] += 0.5 * w
            elif attr in (Attribute.GOLD_WATER, Attribute.GOOD) and mod == Modality.IS:
                score[seat] -= w
    return score


def seer_confirmed_wolves(obs: Observation) -> list[int]:
    """Seats a seer claimant has named as wolves (trusted by the script)."""
    claimants = seer_claimants_of(obs)
    out = set()
    for fm in obs.speeches:
        if fm.speaker not in claimants:
            continue
        for seat, attr, mod in fm.mentioned():
            if seat != fm.speaker and attr == Attribute.WEREWOLF and mod == Modality.IS:
                out.add(seat)
    return sorted(out)


def gold_water_seats(obs: Observation) -> list[int]:
    claimants = seer_claimants_of(obs)
    out = set()
    for fm in obs.speeches:
        if fm.speaker not in claimants:
            continue
        for seat, attr, mod in fm.mentioned():
            if seat != fm.speaker and attr == Attribute.GOLD_WATER and mod == Modality.IS:
                out.add(seat)
    return sorted(out)


def role_claimants(obs: Observation, attr: Attribute) -> list[int]:
    return sorted({fm.speaker for fm in obs.speeches
                   if fm.get(fm.speaker, attr) == Modality.IS})


def _argmax_score(candidates, score) -> Optional[int]:
    best = None
    for s in sorted(candidates):
        if best is None or score[s] > score[best]:
            best = s
    return best


class ScriptedAgent:
    """One seat's deterministic policy; construct fresh per game."""

    def __init__(self, seat: int):
        self.seat = seat

    # ------------------------------------------------------------- actions

    def decide(self, obs: Observation, dec: Decision) -> Action:
        kind = dec.kind
        if kind == DecisionType.WOLF_KILL:
            return Action("kill", self._wolf_target(obs, dec))
        if kind == DecisionType.SEER:
            score = accusation_scores(obs)
            targets = sorted(a.target for a in dec.options)
            return Action("check", _argmax_score(targets, score))
        if kind == DecisionType.WITCH:
            return self._witch_choice(obs, dec)
        if kind == DecisionType.VOTE:
            return self._vote_choice(obs, dec)
        if kind == DecisionType.HUNTER:
            targets = {a.target for a in dec.options if a.kind == "shoot"}
            confirmed = [s for s in seer_confirmed_wolves(obs) if s in targets]
            if confirmed:
                return Action("shoot", confirmed[0])
            score = accusation_scores(obs)
            trusted = set(seer_claimants_of(obs)) | set(gold_water_seats(obs))
            pool = [s for s in sorted(targets) if s not in trusted and score[s] > 0]
            if pool:
                return Action("shoot", _argmax_score(pool, score))
            return Action("decline")
        if kind == DecisionType.SUICIDE:
            return Action("speak")
        raise ValueError(f"unexpected decision {kind}")

    def speak(self, obs: Observation, dec: Decision) -> SpeechInstruction:
        inst = FeatureMatrix(self.seat, dec.header)
        me = self.seat
        score = accusation_scores(obs)
        if obs.role == Role.SEER:
            inst.set(me, Attribute.SEER, Modality.IS)
            if obs.seer_checks:
                target, is_wolf = obs.seer_checks[-1]
                inst.set(target, Attribute.CHECK, Modality.IS)
                inst.set(target,
                         Attribute.WEREWOLF if is_wolf else Attribute.GOLD_WATER,
                         Modality.IS)
            for target, is_wolf in obs.seer_checks[:-1]:
                if is_wolf:
                    inst.set(target, Attribute.WEREWOLF, Modality.IS)
                else:
                    inst.set(target, Attribute.GOLD_WATER, Modality.IS)
        elif obs.role == Role.WITCH:
            inst.set(me, Attribute.WITCH, Modality.IS)
            if obs.witch_saved is not None:
                inst.set(obs.witch_saved, Attribute.SAVE, Modality.IS)
                inst.set(obs.witch_saved, Attribute.SILVER_WATER, Modality.IS)
            if obs.witch_poisoned is not None:
                inst.set(obs.witch_poisoned, Attribute.POISON, Modality.IS)
        elif obs.role == Role.WEREWOLF:
            inst.set(me, Attribute.VILLAGER, Modality.IS)
            inst.set(me, Attribute.GOOD, Modality.IS)
        else:
            inst.set(me, Attribute.GOOD, Modality.IS)
        intent = self._speech_vote_intent(obs, score)
        if intent is not None:
            inst.set(intent, Attribute.WEREWOLF, Modality.IS)
            inst.set(intent, Attribute.VOTE, Modality.IS)
        return inst

    # ------------------------------------------------------------- helpers

    def _living_others(self, obs) -> list[int]:
        return [s for s in obs.living() if s != self.seat]

    def _wolf_target(self, obs: Observation, dec: Decision) -> int:
        mates = set(obs.teammates) | {self.seat}
        legal = sorted(a.target for a in dec.options)
        outsiders = [s for s in legal if s not in mates]
        if not outsiders:
            return legal[0]
        # verified goods first (muddy the water), then the claimed specials
        for claims in (gold_water_seats(obs),
                       role_claimants(obs, Attribute.WITCH),
                       role_claimants(obs, Attribute.SEER)):
            hits = [s for s in claims if s in outsiders]
            if hits:
                return hits[0]
        return outsiders[0]

    def _witch_choice(self, obs: Observation, dec: Decision) -> Action:
        saves = [a for a in dec.options if a.kind == "save"]
        if saves and obs.day == 1:
            return saves[0]
        poisons = {a.target for a in dec.options if a.kind == "poison"}
        confirmed = [s for s in seer_confirmed_wolves(obs)
                     if s in poisons and s != self.seat]
        if confirmed and obs.day >= 2:
            return Action("poison", confirmed[0])
        return Action("pass")

    def _good_vote_target(self, obs: Observation, legal: list[int],
                          score: dict[int, float]) -> Optional[int]:
        if not legal:
            return None
        if obs.role == Role.SEER:
            known = [t for t, w in obs.seer_checks if w and t in legal]
            if known:
                return known[0]
            cleared = {t for t, w in obs.seer_checks if not w}
            legal = [s for s in legal if s not in cleared] or legal
        confirmed = [s for s in seer_confirmed_wolves(obs) if s in legal]
        if confirmed:
            return confirmed[0]
        trusted = (set(role_claimants(obs, Attribute.SEER))
                   | set(role_claimants(obs, Attribute.WITCH))
                   | set(gold_water_seats(obs)))
        pos = [s for s in legal if score[s] > 0 and s not in trusted]
        if pos:
            return _argmax_score(pos, score)
        quiet = [s for s in legal if s not in trusted]
        return (quiet or legal)[0]

    def _wolf_frame_target(self, obs: Observation, candidates: list[int],
                           score) -> Optional[int]:
        # frame quiet goods; counter-claiming declared specials is out of reach
        mates = set(obs.teammates) | {self.seat}
        trusted = (set(role_claimants(obs, Attribute.SEER))
                   | set(role_claimants(obs, Attribute.WITCH))
                   | set(gold_water_seats(obs)))
        pool = [s for s in candidates if s not in mates and s not in trusted]
        if not pool:
            pool = [s for s in candidates if s not in mates]
        if not pool:
            return None
        pos = [s for s in pool if score[s] > 0]
        return _argmax_score(pos, score) if pos else pool[0]

    def _speech_vote_intent(self, obs: Observation, score) -> Optional[int]:
        living = self._living_others(obs)
        if obs.role == Role.WEREWOLF:
            return self._wolf_frame_target(obs, living, score)
        return self._good_vote_target(obs, living, score)

    def _vote_choice(self, obs: Observation, dec: Decision) -> Action:
        legal = sorted(a.target for a in dec.options if a.kind == "vote")
        score = accusation_scores(obs)
        if obs.role == Role.WEREWOLF:
            target = self._wolf_frame_target(
                obs, [s for s in legal if s != self.seat], score)
            return Action("vote", target) if target is not None else Action("abstain")
        legal = [s for s in legal if s != self.seat]
        target = self._good_vote_target(obs, legal, score)
        return Action("vote", target) if target is not None else Action("abstain")


def play_scripted_game(seed: int) -> E.Game:
    game = E.new_game(seed)
    agents = {s: ScriptedAgent(s) for s in E.SEATS}
    while not game.over:
        for dec in list(game.pending()):
            obs = E.observe(game, dec.seat)
            if dec.kind == DecisionType.SPEECH:
                game.submit_speech(dec.seat, agents[dec.seat].speak(obs, dec))
            else:
                game.submit(dec.seat, agents[dec.seat].decide(obs, dec))
    return game


def gen_scripted_dataset(n_games: int, seed: int, out_dir) -> list[Path]:
    """Play n seeded scripted games and write one replay log per game."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    paths = []
    for i in range(n_games):
        game_seed = rng.getrandbits(48)
        game = play_scripted_game(game_seed)
        path = out_dir / f"game_{i:05d}.jsonl"
        with open(path, "w") as fp:
            E.write_log(game, fp)
        paths.append(path)
    return paths


def dataset_paths(source) -> list[Path]:
    p = Path(source)
    if p.is_dir():
        return sorted(p.glob("*.jsonl"))
    return [p]
