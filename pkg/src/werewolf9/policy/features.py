"""Observation featurization for the decision network.

Everything here is seat-symmetric: no feature encodes an absolute seat
number, only relations (self, teammate, checked, ...), so relabeling seats
permutes the per-seat feature rows and nothing else.
"""
from __future__ import annotations

import bisect
from typing import Optional

import numpy as np

from .. import engine as E
from ..engine import Decision, DecisionType, Observation, Phase, Role
from ..protocol import FeatureMatrix, M_ATTRIBUTES, N_PLAYERS

N_MODS = 6
CELLS_DIM = M_ATTRIBUTES * N_MODS            # 108
DAY_CAP = 10
ORDER_CAP = 9
HEADER_DIM = DAY_CAP + 3 + ORDER_CAP         # day one-hot, kind, order one-hot
ROW_DIM = CELLS_DIM + 1 + HEADER_DIM         # + by_self flag
PUB_DIM = 28
CTX_DIM = 39

ROLE_ORDER = (Role.VILLAGER, Role.SEER, Role.WITCH, Role.HUNTER, Role.WEREWOLF)
ROLE_INDEX = {r: i for i, r in enumerate(ROLE_ORDER)}
N_ROLES = 5

PHASE_ORDER = (Phase.NIGHT, Phase.DAY_ANNOUNCE, Phase.LAST_WORDS, Phase.SPEECH,
               Phase.VOTE, Phase.EXILE, Phase.GAME_OVER)
PHASE_INDEX = {p: i for i, p in enumerate(PHASE_ORDER)}

DECISION_ORDER = (DecisionType.WOLF_KILL, DecisionType.WITCH, DecisionType.SEER,
                  DecisionType.VOTE, DecisionType.HUNTER, DecisionType.SUICIDE,
                  DecisionType.SPEECH)
DECISION_INDEX = {d: i for i, d in enumerate(DECISION_ORDER)}

KIND_INDEX = {"first": 0, "second": 1, "last_words": 2}

# fixed option layout per decision type: 9 seat slots + global options
GLOBAL_OPTS = {
    DecisionType.WOLF_KILL: (),
    DecisionType.SEER: (),
    DecisionType.WITCH: ("save", "pass"),
    DecisionType.VOTE: ("abstain",),
    DecisionType.HUNTER: ("decline",),
    DecisionType.SUICIDE: ("speak", "suicide"),
}
SEAT_KIND = {
    DecisionType.WOLF_KILL: "kill",
    DecisionType.SEER: "check",
    DecisionType.WITCH: "poison",
    DecisionType.VOTE: "vote",
    DecisionType.HUNTER: "shoot",
    DecisionType.SUICIDE: None,
}


def n_options(dtype: DecisionType) -> int:
    seats = 0 if SEAT_KIND[dtype] is None else N_PLAYERS
    return seats + len(GLOBAL_OPTS[dtype])


def action_index(dtype: DecisionType, action: E.Action) -> int:
    seat_kind = SEAT_KIND[dtype]
    if seat_kind is not None and action.kind == seat_kind:
        return action.target - 1
    base = 0 if seat_kind is None else N_PLAYERS
    return base + GLOBAL_OPTS[dtype].index(action.kind)


def legal_mask(decision: Decision) -> np.ndarray:
    mask = np.zeros(n_options(decision.kind), dtype=bool)
    for act in decision.options:
        mask[action_index(decision.kind, act)] = True
    return mask


def index_to_action(decision: Decision, idx: int) -> E.Action:
    for act in decision.options:
        if action_index(decision.kind, act) == idx:
            return act
    raise ValueError(f"index {idx} is not a legal option of {decision}")


# ------------------------------------------------------------- speech tape

def row_input_block(cells: np.ndarray, speaker: int, day: int, kind: str,
                    order: int) -> np.ndarray:
    """(9, ROW_DIM) inputs for one speech: per-row claim one-hots + header."""
    block = np.zeros((N_PLAYERS, ROW_DIM))
    onehot = block[:, :CELLS_DIM].reshape(N_PLAYERS, M_ATTRIBUTES, N_MODS)
    np.put_along_axis(onehot, cells[:, :, None].astype(np.int64), 1.0, axis=2)
    block[speaker - 1, CELLS_DIM] = 1.0  # by_self: the row about the speaker
    h = CELLS_DIM + 1
    block[:, h + min(day, DAY_CAP) - 1] = 1.0
    block[:, h + DAY_CAP + KIND_INDEX[kind]] = 1.0
    block[:, h + DAY_CAP + 3 + min(order, ORDER_CAP - 1)] = 1.0
    return block


class SpeechTape:
    """Append-only featurized record of every public speech in one game.

    The tape is viewer-independent, so all nine agents (and the learner)
    share one tape per episode.
    """

    def __init__(self):
        self.speakers: list[int] = []
        self.blocks: list[np.ndarray] = []      # (9, ROW_DIM) each
        self._by_speaker: dict[int, list[int]] = {s: [] for s in range(1, N_PLAYERS + 1)}
        self._about: dict[int, list[int]] = {s: [] for s in range(1, N_PLAYERS + 1)}

    def __len__(self) -> int:
        return len(self.speakers)

    def append(self, fm: FeatureMatrix) -> None:
        h = fm.header
        idx = len(self.speakers)
        self.speakers.append(fm.speaker)
        self.blocks.append(row_input_block(
            fm.cells, fm.speaker,
            h.day if h else 1, h.kind if h else "first", h.order if h else 0))
        self._by_speaker[fm.speaker].append(idx)
        mentioned = fm.cells.any(axis=1)
        for seat in range(1, N_PLAYERS + 1):
            if mentioned[seat - 1]:
                self._about[seat].append(idx)

    def sync_from(self, speeches: list[FeatureMatrix]) -> None:
        """Catch up with an observation's public speech list (append-only)."""
        for fm in speeches[len(self.speakers):]:
            self.append(fm)

    @staticmethod
    def _tail_below(idxs: list[int], cutoff: int, cap: int) -> list[int]:
        hi = bisect.bisect_left(idxs, cutoff)
        return idxs[max(0, hi - cap):hi]

    def speaker_items(self, seat: int, cutoff: int, cap: int = 10) -> list[int]:
        return self._tail_below(self._by_speaker[seat], cutoff, cap)

    def about_rows(self, seat: int, cutoff: int, cap: int = 10) -> list[int]:
        return self._tail_below(self._about[seat], cutoff, cap)


# --------------------------------------------------------------- public/ctx

def public_features(obs: Observation) -> np.ndarray:
    """(9, PUB_DIM) viewer-relative public and private per-seat state."""
    pub = np.zeros((N_PLAYERS, PUB_DIM))
    me = obs.viewer
    announced = {s for _, seats in obs.announced_deaths for s in seats}
    exiled = {s for _, s in obs.exiles if s is not None}
    teammates = set(obs.teammates)
    checked = {t: wolf for t, wolf in obs.seer_checks}
    known_targets = {t for _, t in obs.witch_known_targets}
    tonight = dict(obs.witch_known_targets).get(obs.day)
    last_votes = obs.votes[-1]["ballots"] if obs.votes else {}
    received_last: dict[int, int] = {}
    for t in last_votes.values():
        if t is not None:
            received_last[t] = received_last.get(t, 0) + 1
    received_total: dict[int, int] = {}
    for sess in obs.votes:
        for t in sess["ballots"].values():
            if t is not None:
                received_total[t] = received_total.get(t, 0) + 1
    spoke_today = {fm.speaker for fm in obs.speeches
                   if fm.header and fm.header.day == obs.day}
    shot_victims = {t for _, t in obs.hunter_shots if t is not None}
    suicided = set(obs.suicides)
    prev_round_votes: dict[int, int] = {}
    if obs.wolf_night_votes:
        latest = max(r for r, _, _ in obs.wolf_night_votes)
        for r, _, target in obs.wolf_night_votes:
            if r == latest:
                prev_round_votes[target] = prev_round_votes.get(target, 0) + 1

    is_wolf = obs.role == Role.WEREWOLF
    for seat in range(1, N_PLAYERS + 1):
        row = pub[seat - 1]
        alive = obs.alive[seat]
        row[0] = float(alive)
        row[1] = float(seat == me)
        row[2] = float(seat in announced)
        row[3] = float(seat in exiled)
        rev = obs.revealed_roles.get(seat)
        if rev is not None:
            row[6 + ROLE_INDEX[rev]] = 1.0
            row[11] = 1.0
        row[4] = float(seat in shot_victims)
        row[5] = float(seat in suicided)
        known_good = known_wolf = False
        if seat == me:
            known_wolf = is_wolf
            known_good = not is_wolf
        elif is_wolf:
            known_wolf = seat in teammates
            known_good = seat not in teammates
        elif seat in checked:
            known_wolf = checked[seat]
            known_good = not checked[seat]
        row[12] = float(known_good)
        row[13] = float(known_wolf)
        row[14] = float(seat in checked)
        row[15] = float(seat in known_targets)
        row[16] = float(tonight == seat)
        row[17] = float(obs.witch_saved == seat)
        row[18] = float(obs.witch_poisoned == seat)
        row[19] = float(seat in teammates)
        row[20] = prev_round_votes.get(seat, 0) / 3.0
        row[21] = received_last.get(seat, 0) / 8.0
        row[22] = float(last_votes.get(seat) == me)
        row[23] = float(seat in last_votes and last_votes.get(seat) is None)
        row[24] = received_total.get(seat, 0) / 12.0
        row[25] = float(seat in obs.tied_candidates)
        row[26] = float(seat in spoke_today)
        row[27] = 0.0 if alive else min(obs.day, DAY_CAP) / DAY_CAP
    return pub


def context_features(obs: Observation, decision: Optional[Decision]) -> np.ndarray:
    ctx = np.zeros(CTX_DIM)
    ctx[min(obs.day, DAY_CAP) - 1] = 1.0
    ctx[10 + PHASE_INDEX[obs.phase]] = 1.0
    rnd2 = False
    if obs.phase in (Phase.SPEECH, Phase.VOTE) and obs.tied_candidates:
        rnd2 = True
    ctx[17] = float(rnd2)
    if decision is not None:
        ctx[18 + DECISION_INDEX[decision.kind]] = 1.0
    ctx[25 + ROLE_INDEX[obs.role]] = 1.0
    living = sum(obs.alive.values())
    ctx[30] = living / 9.0
    if obs.role == Role.WEREWOLF:
        wolves_alive = 1 + sum(1 for t in obs.teammates if obs.alive[t])
        ctx[31] = wolves_alive / 3.0
    if obs.role == Role.WITCH:
        ctx[32] = float(obs.witch_antidote_used)
        ctx[33] = float(obs.witch_poison_used)
        if decision is not None and decision.kind == DecisionType.WITCH:
            ctx[34] = float(decision.shown_target is not None)
    if decision is not None and decision.header is not None:
        ctx[35] = decision.header.order / 9.0
        ctx[36 + KIND_INDEX[decision.header.kind]] = 1.0
    return ctx
