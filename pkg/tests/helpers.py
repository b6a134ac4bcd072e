"""Shared fixtures: the reference game log and random-legal game drivers."""
from __future__ import annotations

import io
import random

from werewolf9 import engine as E
from werewolf9 import protocol as P
from werewolf9.engine import Action, Role

# The reconstructed reference game (see tests/test_replay_fixture.py for the
# event-level assertions).  Seed 46 reproduces its speaking orders too.
PAPER_ROLES = {
    1: Role.SEER, 2: Role.WITCH, 3: Role.VILLAGER, 4: Role.WEREWOLF,
    5: Role.VILLAGER, 6: Role.HUNTER, 7: Role.VILLAGER, 8: Role.WEREWOLF,
    9: Role.WEREWOLF,
}
PAPER_SEED = 46


def build_paper_game(seed: int = PAPER_SEED) -> E.Game:
    """Script the reference log's actions through the engine."""
    g = E.new_game(seed, PAPER_ROLES)
    for rnd in (1, 2, 3):
        E.wolf_kill_round(g, {4: 5, 8: 5, 9: 5}, rnd)
    E.resolve_night(g, witch_action=Action("save", 5), seer_target=7)
    seer_claim = (P.FeatureMatrix(1)
                  .set(1, P.Attribute.SEER, P.Modality.IS)
                  .set(7, P.Attribute.GOLD_WATER, P.Modality.IS))
    E.run_day(g, {1: seer_claim},
              {1: 1, 2: 1, 3: 1, 4: None, 5: 4, 6: 4, 7: 4, 8: 4, 9: 4})
    for rnd in (1, 2, 3):
        E.wolf_kill_round(g, {8: 2, 9: 2}, rnd)
    E.resolve_night(g, witch_action=Action("poison", 1), seer_target=3)
    E.run_day(g, {}, {3: 7, 5: 7, 6: 7, 7: 6, 8: 6, 9: 7})
    for rnd in (1, 2, 3):
        E.wolf_kill_round(g, {8: 5, 9: 5}, rnd)
    E.resolve_night(g)
    E.run_day(g, {}, {3: None, 6: 6, 8: None, 9: 6})
    assert g.over
    return g


def paper_log_lines(seed: int = PAPER_SEED) -> str:
    buf = io.StringIO()
    E.write_log(build_paper_game(seed), buf)
    return buf.getvalue()


def play_random_game(seed: int, action_seed: int | None = None,
                     with_speeches: bool = False) -> E.Game:
    """Finish a game with uniformly random legal actions."""
    g = E.new_game(seed)
    rng = random.Random(seed * 7919 + 13 if action_seed is None else action_seed)
    while not g.over:
        for dec in g.pending():
            if dec.kind == E.DecisionType.SPEECH:
                inst = P.random_instruction(rng, dec.seat) if with_speeches else None
                g.submit_speech(dec.seat, inst)
            else:
                g.submit(dec.seat, rng.choice(dec.options))
    return g
