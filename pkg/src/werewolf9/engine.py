"""Deterministic 9-player standard-mode Werewolf engine.

One game is a strictly sequential decision machine driven by a single seeded
RNG.  Documented draw order (per game): role shuffle, then per day: wolf-kill
tie break (only on tie), speech-order start seat (only when no deaths),
speech-order dead-seat pick (only when >1 death), speech direction, tie-round
start seat (only when >1 tied), tie-round direction, vote tie break never
draws (ties go to a second round or no exile).  Logs replay bit-exactly under
the same seed and role assignment.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, IO, Optional

from .protocol import FeatureMatrix, SpeechHeader, SpeechInstruction

N_SEATS = 9
SEATS = tuple(range(1, N_SEATS + 1))


class Role(str, Enum):
    VILLAGER = "villager"
    SEER = "seer"
    WITCH = "witch"
    HUNTER = "hunter"
    WEREWOLF = "werewolf"


GOOD_ROLES = (Role.VILLAGER, Role.SEER, Role.WITCH, Role.HUNTER)
SPECIAL_ROLES = (Role.SEER, Role.WITCH, Role.HUNTER)
ROLE_DECK = (
    Role.VILLAGER, Role.VILLAGER, Role.VILLAGER,
    Role.WEREWOLF, Role.WEREWOLF, Role.WEREWOLF,
    Role.SEER, Role.WITCH, Role.HUNTER,
)


class Phase(str, Enum):
    NIGHT = "night"
    DAY_ANNOUNCE = "day_announce"
    LAST_WORDS = "last_words"
    SPEECH = "speech"
    VOTE = "vote"
    EXILE = "exile"
    GAME_OVER = "game_over"


class Winner(str, Enum):
    WEREWOLVES = "werewolves"
    GOODS = "goods"


class DecisionType(str, Enum):
    WOLF_KILL = "wolf_kill"
    WITCH = "witch"
    SEER = "seer"
    VOTE = "vote"
    HUNTER = "hunter"
    SUICIDE = "suicide"
    SPEECH = "speech_instruction"


@dataclass(frozen=True)
class Action:
    """One legal move: kind plus optional target seat."""

    kind: str  # kill | save | poison | pass | check | vote | abstain | shoot | decline | speak | suicide
    target: Optional[int] = None

    def to_wire(self) -> dict:
        return {"kind": self.kind, "target": self.target}

    @staticmethod
    def from_wire(d: dict) -> "Action":
        return Action(str(d["kind"]), d.get("target"))


@dataclass(frozen=True)
class Decision:
    """A pending decision point for one seat."""

    seat: int
    kind: DecisionType
    options: tuple[Action, ...]
    # extra context: witch sees tonight's kill target, speeches carry headers
    shown_target: Optional[int] = None
    header: Optional[SpeechHeader] = None


@dataclass(frozen=True)
class GameEvent:
    kind: str
    day: int
    data: dict

    def to_wire(self) -> dict:
        return {"kind": self.kind, "day": self.day, "data": self.data}

    @staticmethod
    def from_wire(d: dict) -> "GameEvent":
        return GameEvent(str(d["kind"]), int(d["day"]), dict(d["data"]))


# event kinds
EV_NIGHT_KILL_VOTE = "night_kill_vote"   # {wolf, round, target}          wolves only
EV_WITCH_ACT = "witch_act"               # {choice, target?}              witch only
EV_SEER_CHECK = "seer_check"             # {target, is_werewolf}          seer only
EV_DEATH_ANNOUNCE = "death_announce"     # {seats: [...]}                 public, causes hidden
EV_LAST_WORDS = "last_words"             # {seat, instruction}            public
EV_SPEECH = "speech"                     # {seat, round, instruction}     public
EV_SUICIDE = "suicide"                   # {seat}                         public, reveals werewolf
EV_VOTE = "vote"                         # {voter, target|null, round}    public once appended
EV_EXILE = "exile"                       # {seat|null, round}             public
EV_HUNTER_SHOT = "hunter_shot"           # {shooter, target|null}         public, reveals hunter
EV_GAME_OVER = "game_over"               # {winner}                       public

_PRIVATE_KINDS = {
    EV_NIGHT_KILL_VOTE: "wolves",
    EV_WITCH_ACT: "witch",
    EV_SEER_CHECK: "seer",
}


@dataclass
class SeatState:
    role: Role
    alive: bool = True
    revealed: bool = False
    poisoned: bool = False
    death_day: int = 0
    death_cause: str = ""  # night_kill | poison | night_kill+poison | exile | shot | suicide


@dataclass
class GameState:
    seed: int
    day: int
    phase: Phase
    seats: dict[int, SeatState]
    witch_antidote_used: bool = False
    witch_poison_used: bool = False
    seer_checked: set[int] = field(default_factory=set)
    night_kill_target: Optional[int] = None
    speaking_order: list[int] = field(default_factory=list)
    tied_candidates: set[int] = field(default_factory=set)
    speech_round: int = 1
    vote_round: int = 1
    event_log: list[GameEvent] = field(default_factory=list)
    winner: Optional[Winner] = None

    def living(self) -> list[int]:
        return [s for s in SEATS if self.seats[s].alive]

    def living_with_role(self, role: Role) -> list[int]:
        return [s for s in SEATS if self.seats[s].alive and self.seats[s].role == role]

    def role_of(self, seat: int) -> Role:
        return self.seats[seat].role


class RuleError(ValueError):
    """Raised for submissions that violate the rules or turn order."""


@dataclass
class Observation:
    """Everything one seat may legally know at a point in the game."""

    viewer: int
    day: int
    phase: Phase
    role: Role
    alive: dict[int, bool]
    teammates: tuple[int, ...]                      # fellow wolves, empty otherwise
    revealed_roles: dict[int, Role]                 # public reveals (suicide, hunter shot)
    announced_deaths: list[tuple[int, tuple[int, ...]]]   # (day, seats), causes hidden
    votes: list[dict]                               # closed sessions: {day, round, ballots{voter: target|None}}
    exiles: list[tuple[int, Optional[int]]]
    speeches: list[FeatureMatrix]                   # public speeches + last words, chronological
    hunter_shots: tuple[tuple[int, Optional[int]], ...] = ()   # public: (shooter, target)
    suicides: tuple[int, ...] = ()
    seer_checks: tuple[tuple[int, bool], ...] = ()  # seer only: (target, is_werewolf)
    witch_antidote_used: bool = False               # witch only
    witch_poison_used: bool = False
    witch_known_targets: tuple[tuple[int, int], ...] = ()   # witch only: (night day, kill target)
    witch_saved: Optional[int] = None
    witch_poisoned: Optional[int] = None
    wolf_night_votes: tuple[tuple[int, int, int], ...] = ()  # wolves, current night: (round, wolf, target)
    wolf_kill_history: tuple[tuple[int, int], ...] = ()      # wolves: (day, final target)
    tied_candidates: tuple[int, ...] = ()
    pending: Optional[Decision] = None
    winner: Optional[Winner] = None

    def living(self) -> list[int]:
        return [s for s in SEATS if self.alive[s]]


class Game:
    """Sequential state machine for one 9-player game.

    Drive with pending() / submit(); both coarse ops below wrap this.
    """

    def __init__(self, seed: int, roles: Optional[dict[int, Role]] = None):
        self._rng = random.Random(seed)
        if roles is None:
            deck = list(ROLE_DECK)
            self._rng.shuffle(deck)
            roles = {seat: deck[i] for i, seat in enumerate(SEATS)}
        else:
            # burn the shuffle draw so play-time draws line up with a
            # same-seed shuffled game and logs replay bit-exactly
            self._rng.shuffle(list(range(N_SEATS)))
            roles = {s: Role(r) for s, r in roles.items()}
            if sorted(roles) != list(SEATS):
                raise RuleError("role assignment must cover seats 1..9")
            if sorted(r.value for r in roles.values()) != sorted(r.value for r in ROLE_DECK):
                raise RuleError("role multiset must be 3 villagers, 3 werewolves, seer, witch, hunter")
        self.state = GameState(
            seed=seed, day=1, phase=Phase.NIGHT,
            seats={s: SeatState(role=roles[s]) for s in SEATS},
        )
        self.phase_trace: list[tuple[Phase, int]] = [(Phase.NIGHT, 1)]
        # night bookkeeping
        self._wolf_round = 1
        self._wolf_votes: dict[int, dict[int, int]] = {1: {}, 2: {}, 3: {}}
        self._witch_done = False
        self._seer_done = False
        self._night_saved = False
        self._night_poison_target: Optional[int] = None
        self._witch_shown: dict[int, int] = {}      # day -> kill target shown to witch
        self._kill_history: list[tuple[int, int]] = []
        # day bookkeeping
        self._speech_queue: list[int] = []
        self._speech_idx = 0
        self._last_words_queue: list[int] = []
        self._hunter_queue: list[int] = []
        self._after_last_words: str = ""            # "speech" | "night"
        self._vote_buffer: dict[int, Optional[int]] = {}
        self._night_deaths: list[int] = []
        self._pending: dict[int, Decision] = {}
        self._submitted: dict[int, Action] = {}
        self._suicide_seat: Optional[int] = None    # wolf currently deciding speak vs suicide
        self._advance()

    # ------------------------------------------------------------------ api

    @property
    def over(self) -> bool:
        return self.state.winner is not None

    @property
    def winner(self) -> Optional[Winner]:
        return self.state.winner

    def pending(self) -> list[Decision]:
        """Seats still due to act in the current decision group, in seat order."""
        return [self._pending[s] for s in sorted(self._pending)
                if s not in self._submitted]

    def legal_actions(self, seat: int) -> tuple[Action, ...]:
        if seat not in SEATS:
            raise RuleError(f"no such seat {seat}")
        if not self.state.seats[seat].alive and seat not in self._pending:
            raise RuleError(f"seat {seat} is dead")
        if seat not in self._pending:
            raise RuleError(f"seat {seat} is not due to act")
        return self._pending[seat].options

    def submit(self, seat: int, action: Action) -> None:
        if self.over:
            raise RuleError("game is over")
        if seat not in self._pending:
            raise RuleError(f"seat {seat} is not due to act")
        if seat in self._submitted:
            raise RuleError(f"seat {seat} already acted")
        dec = self._pending[seat]
        if dec.kind == DecisionType.SPEECH:
            raise RuleError("speech decisions take submit_speech()")
        if action not in dec.options:
            raise RuleError(f"illegal action {action} for seat {seat}")
        self._submitted[seat] = action
        if len(self._submitted) == len(self._pending):
            group = dict(self._submitted)
            self._pending.clear()
            self._submitted.clear()
            self._apply_group(dec.kind, group)
            self._advance()

    def submit_speech(self, seat: int, instruction: Optional[SpeechInstruction]) -> None:
        if seat not in self._pending or self._pending[seat].kind != DecisionType.SPEECH:
            raise RuleError(f"seat {seat} has no pending speech")
        dec = self._pending[seat]
        inst = instruction if instruction is not None else FeatureMatrix(speaker=seat, header=dec.header)
        inst = inst.with_speaker_header(seat, dec.header)
        self._pending.clear()
        self._submitted.clear()
        self._apply_speech(seat, dec, inst)
        self._advance()

    # --------------------------------------------------------------- events

    def _emit(self, kind: str, data: dict) -> None:
        self.state.event_log.append(GameEvent(kind, self.state.day, data))

    def _enter(self, phase: Phase) -> None:
        self.state.phase = phase
        self.phase_trace.append((phase, self.state.day))

    # ------------------------------------------------------------- schedule

    def _advance(self) -> None:
        """Push the machine forward until a decision pends or the game ends."""
        while not self.over and not self._pending:
            phase = self.state.phase
            if phase == Phase.NIGHT:
                self._advance_night()
            elif phase == Phase.DAY_ANNOUNCE:
                self._advance_morning()
            elif phase == Phase.LAST_WORDS:
                self._advance_last_words()
            elif phase == Phase.SPEECH:
                self._advance_speech()
            elif phase == Phase.VOTE:
                break  # vote group was scheduled; nothing to do
            elif phase == Phase.EXILE:
                self._advance_exile()
            else:
                break

    # night: wolf rounds 1..3 -> witch -> seer -> resolve
    def _advance_night(self) -> None:
        st = self.state
        if self._wolf_round <= 3:
            wolves = st.living_with_role(Role.WEREWOLF)
            opts = tuple(Action("kill", t) for t in st.living())
            self._pending = {w: Decision(w, DecisionType.WOLF_KILL, opts) for w in wolves}
            return
        if st.night_kill_target is None:
            self._resolve_wolf_target()
        if not self._witch_done:
            self._witch_done = True
            witch = st.living_with_role(Role.WITCH)
            if witch:
                opts = self._witch_options(witch[0])
                if len(opts) == 1:  # pass only: no real choice, auto-resolve
                    self._emit(EV_WITCH_ACT, {"choice": "pass", "target": None})
                else:
                    shown = st.night_kill_target if not st.witch_antidote_used else None
                    self._pending = {witch[0]: Decision(witch[0], DecisionType.WITCH, opts, shown_target=shown)}
                    return
        if not self._seer_done:
            self._seer_done = True
            seer = st.living_with_role(Role.SEER)
            if seer:
                targets = [t for t in st.living() if t != seer[0] and t not in st.seer_checked]
                if targets:
                    opts = tuple(Action("check", t) for t in targets)
                    self._pending = {seer[0]: Decision(seer[0], DecisionType.SEER, opts)}
                    return
        self._resolve_night()

    def _witch_options(self, witch: int) -> tuple[Action, ...]:
        st = self.state
        opts: list[Action] = []
        target = st.night_kill_target
        if not st.witch_antidote_used and target is not None:
            if target != witch or st.day == 1:  # can only save herself on the first night
                opts.append(Action("save", target))
        if not st.witch_poison_used:
            opts.extend(Action("poison", t) for t in st.living())
        opts.append(Action("pass"))
        return tuple(opts)

    def _resolve_wolf_target(self) -> None:
        st = self.state
        votes = self._wolf_votes[3]
        tally: dict[int, int] = {}
        for t in votes.values():
            tally[t] = tally.get(t, 0) + 1
        top = max(tally.values())
        tied = sorted(t for t, c in tally.items() if c == top)
        st.night_kill_target = tied[0] if len(tied) == 1 else self._rng.choice(tied)
        self._kill_history.append((st.day, st.night_kill_target))
        self._witch_done = False
        self._seer_done = False
        witch = st.living_with_role(Role.WITCH)
        if witch and not st.witch_antidote_used:
            self._witch_shown[st.day] = st.night_kill_target

    def _resolve_night(self) -> None:
        st = self.state
        deaths: list[int] = []
        target = st.night_kill_target
        if target is not None and not self._night_saved:
            st.seats[target].death_cause = "night_kill"
            deaths.append(target)
        pt = self._night_poison_target
        if pt is not None:
            seat = st.seats[pt]
            seat.poisoned = True
            seat.death_cause = "night_kill+poison" if seat.death_cause else "poison"
            if pt not in deaths:
                deaths.append(pt)
        for s in deaths:
            st.seats[s].alive = False
            st.seats[s].death_day = st.day
        self._night_deaths = sorted(deaths)
        self._emit(EV_DEATH_ANNOUNCE, {"seats": self._night_deaths})
        self._enter(Phase.DAY_ANNOUNCE)

    def _advance_morning(self) -> None:
        st = self.state
        if self._check_win():
            return
        self._last_words_queue = list(self._night_deaths) if st.day == 1 else []
        hunter_died = [
            s for s in self._night_deaths
            if st.seats[s].role == Role.HUNTER and not st.seats[s].poisoned
        ]
        self._hunter_queue = hunter_died
        self._after_last_words = "speech"
        self._enter(Phase.LAST_WORDS)

    def _advance_last_words(self) -> None:
        if self._last_words_queue:
            seat = self._last_words_queue[0]
            header = SpeechHeader(day=self.state.day, kind="last_words", order=0)
            self._pending = {seat: Decision(seat, DecisionType.SPEECH, (), header=header)}
            return
        if self._hunter_queue:
            shooter = self._hunter_queue.pop(0)
            opts = tuple(Action("shoot", t) for t in self.state.living()) + (Action("decline"),)
            self._pending = {shooter: Decision(shooter, DecisionType.HUNTER, opts)}
            return
        if self._after_last_words == "night":
            self._start_night()
        else:
            self._start_speech_round(1)

    def _start_speech_round(self, rnd: int) -> None:
        st = self.state
        st.speech_round = rnd
        if rnd == 1:
            living = sorted(st.living())
            if self._night_deaths:
                dead = self._night_deaths
                anchor = dead[0] if len(dead) == 1 else self._rng.choice(sorted(dead))
                direction = self._rng.choice((1, -1))
                order = _ring_from(anchor, direction, living, include_anchor=False)
            else:
                start = self._rng.choice(living)
                direction = self._rng.choice((1, -1))
                order = _ring_from(start, direction, living, include_anchor=True)
        else:
            tied = sorted(st.tied_candidates)
            start = tied[0] if len(tied) == 1 else self._rng.choice(tied)
            direction = self._rng.choice((1, -1))
            order = _ring_from(start, direction, tied, include_anchor=True)
        st.speaking_order = order
        self._speech_idx = 0
        self._enter(Phase.SPEECH)

    def _advance_speech(self) -> None:
        st = self.state
        while self._speech_idx < len(st.speaking_order):
            seat = st.speaking_order[self._speech_idx]
            if not st.seats[seat].alive:  # can happen if a hunter shot mid-round removed them
                self._speech_idx += 1
                continue
            if st.seats[seat].role == Role.WEREWOLF and self._suicide_seat != seat:
                self._suicide_seat = seat
                opts = (Action("speak"), Action("suicide"))
                self._pending = {seat: Decision(seat, DecisionType.SUICIDE, opts)}
                return
            header = SpeechHeader(day=st.day, kind="first" if st.speech_round == 1 else "second",
                                  order=self._speech_idx)
            self._pending = {seat: Decision(seat, DecisionType.SPEECH, (), header=header)}
            return
        self._start_vote(st.speech_round)

    def _start_vote(self, rnd: int) -> None:
        st = self.state
        st.vote_round = rnd
        if rnd == 1:
            voters = st.living()
            targets = st.living()
        else:
            voters = [s for s in st.living() if s not in st.tied_candidates]
            targets = sorted(st.tied_candidates)
        self._vote_buffer = {}
        opts_by_voter = {
            v: tuple(Action("vote", t) for t in targets) + (Action("abstain"),)
            for v in voters
        }
        if not voters:  # everyone is a tied candidate: nobody may vote, no exile
            self._emit(EV_EXILE, {"seat": None, "round": rnd})
            self._enter(Phase.EXILE)
            return
        self._pending = {v: Decision(v, DecisionType.VOTE, opts_by_voter[v]) for v in voters}
        self._enter(Phase.VOTE)

    def _advance_exile(self) -> None:
        # reached only for the no-exile path; exile-with-seat handles itself
        self._start_night()

    def _start_night(self) -> None:
        st = self.state
        st.day += 1
        st.night_kill_target = None
        st.tied_candidates = set()
        st.speaking_order = []
        self._wolf_round = 1
        self._wolf_votes = {1: {}, 2: {}, 3: {}}
        self._witch_done = False
        self._seer_done = False
        self._night_saved = False
        self._night_poison_target = None
        self._night_deaths = []
        self._suicide_seat = None
        self._enter(Phase.NIGHT)

    # ---------------------------------------------------------------- apply

    def _apply_group(self, dec_kind: DecisionType, group: dict[int, Action]) -> None:
        if dec_kind == DecisionType.WOLF_KILL:
            rnd = self._wolf_round
            for wolf in sorted(group):
                self._emit(EV_NIGHT_KILL_VOTE, {"wolf": wolf, "round": rnd, "target": group[wolf].target})
                self._wolf_votes[rnd][wolf] = group[wolf].target
            self._wolf_round += 1
        elif dec_kind == DecisionType.WITCH:
            (witch, act), = group.items()
            if act.kind == "save":
                self._night_saved = True
                self.state.witch_antidote_used = True
            elif act.kind == "poison":
                self._night_poison_target = act.target
                self.state.witch_poison_used = True
            self._emit(EV_WITCH_ACT, {"choice": act.kind, "target": act.target})
        elif dec_kind == DecisionType.SEER:
            (seer, act), = group.items()
            is_wolf = self.state.seats[act.target].role == Role.WEREWOLF
            self.state.seer_checked.add(act.target)
            self._emit(EV_SEER_CHECK, {"target": act.target, "is_werewolf": is_wolf})
        elif dec_kind == DecisionType.VOTE:
            for voter in sorted(group):
                act = group[voter]
                target = act.target if act.kind == "vote" else None
                self._vote_buffer[voter] = target
                self._emit(EV_VOTE, {"voter": voter, "target": target, "round": self.state.vote_round})
            self._resolve_vote()
        elif dec_kind == DecisionType.HUNTER:
            (shooter, act), = group.items()
            target = act.target if act.kind == "shoot" else None
            self._emit(EV_HUNTER_SHOT, {"shooter": shooter, "target": target})
            self.state.seats[shooter].revealed = True
            if target is not None:
                self._kill_seat(target, "shot")
                if self._check_win():
                    return
        elif dec_kind == DecisionType.SUICIDE:
            (seat, act), = group.items()
            if act.kind == "suicide":
                self._emit(EV_SUICIDE, {"seat": seat})
                self.state.seats[seat].revealed = True
                self._kill_seat(seat, "suicide")
                if self._check_win():
                    return
                # skip the rest of the day entirely
                self._suicide_seat = None
                self._last_words_queue = []
                self._hunter_queue = []
                self._start_night()
            # on "speak", _advance_speech will now hand out the speech decision

    def _apply_speech(self, seat: int, dec: Decision, inst: SpeechInstruction) -> None:
        st = self.state
        if dec.header.kind == "last_words":
            self._emit(EV_LAST_WORDS, {"seat": seat, "instruction": inst.to_wire()})
            self._last_words_queue.pop(0)
        else:
            self._emit(EV_SPEECH, {"seat": seat, "round": st.speech_round, "instruction": inst.to_wire()})
            self._suicide_seat = None
            self._speech_idx += 1

    def _resolve_vote(self) -> None:
        st = self.state
        tally: dict[int, int] = {}
        for target in self._vote_buffer.values():
            if target is not None:
                tally[target] = tally.get(target, 0) + 1
        rnd = st.vote_round
        if not tally:
            self._emit(EV_EXILE, {"seat": None, "round": rnd})
            self._enter(Phase.EXILE)
            return
        top = max(tally.values())
        leaders = sorted(t for t, c in tally.items() if c == top)
        if len(leaders) == 1:
            exiled = leaders[0]
            self._emit(EV_EXILE, {"seat": exiled, "round": rnd})
            self._enter(Phase.EXILE)
            self._kill_seat(exiled, "exile")
            if self._check_win():
                return
            self._last_words_queue = [exiled]
            self._hunter_queue = (
                [exiled] if st.seats[exiled].role == Role.HUNTER and not st.seats[exiled].poisoned else []
            )
            self._after_last_words = "night"
            self._enter(Phase.LAST_WORDS)
        elif rnd == 1:
            st.tied_candidates = set(leaders)
            self._start_speech_round(2)
        else:
            self._emit(EV_EXILE, {"seat": None, "round": rnd})
            self._enter(Phase.EXILE)

    def _kill_seat(self, seat: int, cause: str) -> None:
        ss = self.state.seats[seat]
        if not ss.alive:
            raise RuleError(f"seat {seat} is already dead")
        ss.alive = False
        ss.death_day = self.state.day
        ss.death_cause = cause

    def _check_win(self) -> bool:
        w = check_win(self.state)
        if w is not None:
            self.state.winner = w
            self._emit(EV_GAME_OVER, {"winner": w.value})
            self._enter(Phase.GAME_OVER)
            self._pending.clear()
            return True
        return False

    # ------------------------------------------------------------- wolf aux

    def wolf_prior_votes(self) -> dict[int, dict[int, int]]:
        """Completed rounds of the current night's wolf vote (round -> wolf -> target)."""
        return {r: dict(v) for r, v in self._wolf_votes.items() if v}


def _ring_from(anchor: int, direction: int, members: list[int], include_anchor: bool) -> list[int]:
    """Walk the seat ring from anchor in direction, keeping only `members`."""
    order = []
    start = anchor if include_anchor else anchor + direction
    for i in range(N_SEATS):
        seat = (start - 1 + direction * i) % N_SEATS + 1
        if seat in members:
            order.append(seat)
    return order


# --------------------------------------------------------------------- ops

def new_game(seed: int, roles: Optional[dict[int, Role]] = None) -> Game:
    """Fresh game: seeded role shuffle (unless given), night of day 1, empty log."""
    return Game(seed, roles)


def legal_actions(game: Game, seat: int) -> tuple[Action, ...]:
    return game.legal_actions(seat)


def wolf_kill_round(game: Game, votes: dict[int, int], rnd: int) -> None:
    """Submit one full round of wolf kill votes (wolf seat -> target seat)."""
    if game.state.phase != Phase.NIGHT or game._wolf_round != rnd:
        raise RuleError(f"not wolf round {rnd}")
    for wolf in sorted(votes):
        game.submit(wolf, Action("kill", votes[wolf]))


def resolve_night(game: Game, witch_action: Optional[Action] = None,
                  seer_target: Optional[int] = None) -> None:
    """Drive the night to the morning announcement.

    Wolf votes must already be in; witch and seer decisions are taken from the
    arguments when those seats are due (pass / first legal check by default).
    """
    while not game.over and game.state.phase == Phase.NIGHT:
        pend = game.pending()
        if not pend:
            break
        dec = pend[0]
        if dec.kind == DecisionType.WITCH:
            game.submit(dec.seat, witch_action or Action("pass"))
        elif dec.kind == DecisionType.SEER:
            if seer_target is not None:
                game.submit(dec.seat, Action("check", seer_target))
            else:
                game.submit(dec.seat, dec.options[0])
        else:
            raise RuleError("wolf kill votes must be submitted before resolve_night")


def run_day(game: Game, speeches: dict[int, object], votes: dict[int, Optional[int]],
            votes_round2: Optional[dict[int, Optional[int]]] = None) -> None:
    """Run one full day from the morning announcement.

    `speeches[seat]` is a SpeechInstruction, None, or the string "suicide"
    (wolves only).  `votes[seat]` is a target seat or None for abstain; the
    same map serves round 2 unless `votes_round2` is given, with out-of-range
    choices coerced to abstain.
    """
    start_day = game.state.day
    while not game.over and game.state.day == start_day:
        pend = game.pending()
        if not pend:
            break
        kind = pend[0].kind
        if kind == DecisionType.SPEECH:
            dec = pend[0]
            spec = speeches.get(dec.seat)
            game.submit_speech(dec.seat, spec if isinstance(spec, FeatureMatrix) else None)
        elif kind == DecisionType.SUICIDE:
            dec = pend[0]
            wants = speeches.get(dec.seat) == "suicide"
            game.submit(dec.seat, Action("suicide") if wants else Action("speak"))
        elif kind == DecisionType.VOTE:
            vmap = votes if game.state.vote_round == 1 else (votes_round2 or votes)
            for dec in pend:
                choice = vmap.get(dec.seat)
                act = Action("vote", choice) if choice is not None else Action("abstain")
                if act not in dec.options:
                    act = Action("abstain")
                game.submit(dec.seat, act)
        elif kind == DecisionType.HUNTER:
            game.submit(pend[0].seat, Action("decline"))
        else:
            raise RuleError(f"run_day reached unexpected decision {kind}")


def check_win(state: GameState) -> Optional[Winner]:
    """Win conditions in the rulebook's listed order; wolves win ties."""
    villagers = [s for s in SEATS if state.seats[s].role == Role.VILLAGER and state.seats[s].alive]
    specials = [s for s in SEATS if state.seats[s].role in SPECIAL_ROLES and state.seats[s].alive]
    wolves = [s for s in SEATS if state.seats[s].role == Role.WEREWOLF and state.seats[s].alive]
    if not villagers or not specials:
        return Winner.WEREWOLVES
    if not wolves:
        return Winner.GOODS
    return None


def observe(game: Game, seat: int) -> Observation:
    """Project the full state onto what `seat` may legally see."""
    if seat not in SEATS:
        raise RuleError(f"no such seat {seat}")
    st = game.state
    me = st.seats[seat]
    role = me.role
    is_wolf = role == Role.WEREWOLF

    revealed = {s: st.seats[s].role for s in SEATS if st.seats[s].revealed}
    announced: list[tuple[int, tuple[int, ...]]] = []
    votes: list[dict] = []
    exiles: list[tuple[int, Optional[int]]] = []
    speeches: list[FeatureMatrix] = []
    seer_checks: list[tuple[int, bool]] = []
    hunter_shots: list[tuple[int, Optional[int]]] = []
    suicides: list[int] = []
    witch_saved = None
    witch_poisoned = None
    cur_round_votes: dict = {}

    for ev in st.event_log:
        if ev.kind == EV_DEATH_ANNOUNCE:
            announced.append((ev.day, tuple(ev.data["seats"])))
        elif ev.kind == EV_VOTE:
            key = (ev.day, ev.data["round"])
            cur_round_votes.setdefault(key, {})[ev.data["voter"]] = ev.data["target"]
        elif ev.kind == EV_EXILE:
            exiles.append((ev.day, ev.data["seat"]))
        elif ev.kind in (EV_SPEECH, EV_LAST_WORDS):
            speeches.append(FeatureMatrix.from_wire(ev.data["instruction"]))
        elif ev.kind == EV_HUNTER_SHOT:
            hunter_shots.append((ev.data["shooter"], ev.data["target"]))
        elif ev.kind == EV_SUICIDE:
            suicides.append(ev.data["seat"])
        elif ev.kind == EV_SEER_CHECK and role == Role.SEER:
            seer_checks.append((ev.data["target"], ev.data["is_werewolf"]))
        elif ev.kind == EV_WITCH_ACT and role == Role.WITCH:
            if ev.data["choice"] == "save":
                witch_saved = ev.data["target"]
            elif ev.data["choice"] == "poison":
                witch_poisoned = ev.data["target"]
    # vote events are only appended once a session closes, so all are public
    for (day, rnd), ballots in sorted(cur_round_votes.items()):
        votes.append({"day": day, "round": rnd, "ballots": dict(sorted(ballots.items()))})

    teammates: tuple[int, ...] = ()
    wolf_night: tuple[tuple[int, int, int], ...] = ()
    kill_hist: tuple[tuple[int, int], ...] = ()
    if is_wolf:
        teammates = tuple(s for s in SEATS if st.seats[s].role == Role.WEREWOLF and s != seat)
        if st.phase == Phase.NIGHT:
            wolf_night = tuple(
                (rnd, w, t)
                for rnd, m in sorted(game.wolf_prior_votes().items())
                for w, t in sorted(m.items())
            )
        kill_hist = tuple(game._kill_history)

    pending = game._pending.get(seat)
    return Observation(
        viewer=seat, day=st.day, phase=st.phase, role=role,
        alive={s: st.seats[s].alive for s in SEATS},
        teammates=teammates, revealed_roles=revealed,
        announced_deaths=announced, votes=votes, exiles=exiles, speeches=speeches,
        hunter_shots=tuple(hunter_shots), suicides=tuple(suicides),
        seer_checks=tuple(seer_checks),
        witch_antidote_used=st.witch_antidote_used if role == Role.WITCH else False,
        witch_poison_used=st.witch_poison_used if role == Role.WITCH else False,
        witch_known_targets=tuple(sorted(game._witch_shown.items())) if role == Role.WITCH else (),
        witch_saved=witch_saved, witch_poisoned=witch_poisoned,
        wolf_night_votes=wolf_night, wolf_kill_history=kill_hist,
        tied_candidates=tuple(sorted(st.tied_candidates)),
        pending=pending, winner=st.winner,
    )


# ------------------------------------------------------------- replay logs

@dataclass
class ReplayLog:
    seed: int
    roles: dict[int, Role]
    events: list[GameEvent]

    @property
    def winner(self) -> Optional[Winner]:
        for ev in reversed(self.events):
            if ev.kind == EV_GAME_OVER:
                return Winner(ev.data["winner"])
        return None


def write_log(game: Game, fp: IO[str]) -> None:
    header = {"seed": game.state.seed,
              "roles": {str(s): game.state.seats[s].role.value for s in SEATS}}
    fp.write(json.dumps(header) + "\n")
    for ev in game.state.event_log:
        fp.write(json.dumps(ev.to_wire()) + "\n")


def log_to_lines(game: Game) -> list[str]:
    import io
    buf = io.StringIO()
    write_log(game, buf)
    return buf.getvalue().splitlines()


def read_log(fp: IO[str]) -> ReplayLog:
    lines = [ln for ln in fp.read().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty replay log")
    header = json.loads(lines[0])
    roles = {int(s): Role(r) for s, r in header["roles"].items()}
    events = [GameEvent.from_wire(json.loads(ln)) for ln in lines[1:]]
    return ReplayLog(seed=int(header["seed"]), roles=roles, events=events)


class ReplayMismatch(ValueError):
    pass


def drive_from_log(log: ReplayLog,
                   on_decision: Optional[Callable[[Game, Decision, Action], None]] = None,
                   on_speech: Optional[Callable[[Game, Decision, SpeechInstruction], None]] = None,
                   ) -> Game:
    """Re-drive a game from a log, submitting every logged choice in order.

    Raises ReplayMismatch when the log runs dry or desynchronizes; callbacks
    fire before each submission (hook for BC sample extraction).
    """
    queues: dict[str, list[tuple[int, GameEvent]]] = {}
    for idx, ev in enumerate(log.events):
        queues.setdefault(ev.kind, []).append((idx, ev))

    def pop(kind: str, pred) -> GameEvent:
        q = queues.get(kind, [])
        for i, (_, ev) in enumerate(q):
            if pred(ev):
                return q.pop(i)[1]
        raise ReplayMismatch(f"log has no pending {kind} event")

    def next_index(kind: str, pred) -> Optional[int]:
        for idx, ev in queues.get(kind, []):
            if pred(ev):
                return idx
        return None

    game = Game(log.seed, log.roles)
    guard = 0
    while not game.over:
        guard += 1
        if guard > 10_000:
            raise ReplayMismatch("replay did not terminate")
        pend = game.pending()
        if not pend:
            raise ReplayMismatch("engine stalled without decisions")
        kind = pend[0].kind
        if kind == DecisionType.WOLF_KILL:
            rnd = game._wolf_round
            for dec in pend:
                ev = pop(EV_NIGHT_KILL_VOTE, lambda e: e.data["wolf"] == dec.seat and e.data["round"] == rnd)
                act = Action("kill", ev.data["target"])
                if on_decision:
                    on_decision(game, dec, act)
                game.submit(dec.seat, act)
        elif kind == DecisionType.WITCH:
            dec = pend[0]
            ev = pop(EV_WITCH_ACT, lambda e: True)
            act = Action(ev.data["choice"], ev.data.get("target"))
            if on_decision:
                on_decision(game, dec, act)
            game.submit(dec.seat, act)
        elif kind == DecisionType.SEER:
            dec = pend[0]
            ev = pop(EV_SEER_CHECK, lambda e: True)
            act = Action("check", ev.data["target"])
            if on_decision:
                on_decision(game, dec, act)
            game.submit(dec.seat, act)
        elif kind == DecisionType.SUICIDE:
            dec = pend[0]
            # the wolf's next logged appearance decides: suicide before speech?
            n_sui = next_index(EV_SUICIDE, lambda e: e.data["seat"] == dec.seat)
            n_spk = next_index(EV_SPEECH, lambda e: e.data["seat"] == dec.seat)
            if n_sui is not None and (n_spk is None or n_sui < n_spk):
                pop(EV_SUICIDE, lambda e: e.data["seat"] == dec.seat)
                act = Action("suicide")
            else:
                act = Action("speak")
            if on_decision:
                on_decision(game, dec, act)
            game.submit(dec.seat, act)
        elif kind == DecisionType.SPEECH:
            dec = pend[0]
            ev_kind = EV_LAST_WORDS if dec.header.kind == "last_words" else EV_SPEECH
            ev = pop(ev_kind, lambda e: e.data["seat"] == dec.seat)
            inst = FeatureMatrix.from_wire(ev.data["instruction"])
            if on_speech:
                on_speech(game, dec, inst)
            game.submit_speech(dec.seat, inst)
        elif kind == DecisionType.VOTE:
            rnd = game.state.vote_round
            for dec in pend:
                ev = pop(EV_VOTE, lambda e: e.data["voter"] == dec.seat and e.data["round"] == rnd
                         and e.day == game.state.day)
                t = ev.data["target"]
                act = Action("vote", t) if t is not None else Action("abstain")
                if on_decision:
                    on_decision(game, dec, act)
                game.submit(dec.seat, act)
        elif kind == DecisionType.HUNTER:
            dec = pend[0]
            ev = pop(EV_HUNTER_SHOT, lambda e: e.data["shooter"] == dec.seat)
            t = ev.data["target"]
            act = Action("shoot", t) if t is not None else Action("decline")
            if on_decision:
                on_decision(game, dec, act)
            game.submit(dec.seat, act)
    return game


def verify_replay(log: ReplayLog) -> Game:
    """Replay and require event-for-event equality with the source log."""
    game = drive_from_log(log)
    got = [ev.to_wire() for ev in game.state.event_log]
    want = [ev.to_wire() for ev in log.events]
    if got != want:
        for i, (g, w) in enumerate(zip(got, want)):
            if g != w:
                raise ReplayMismatch(f"event {i} differs: got {g}, want {w}")
        raise ReplayMismatch(f"event count differs: got {len(got)}, want {len(want)}")
    return game
