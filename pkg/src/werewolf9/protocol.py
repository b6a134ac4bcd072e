"""Structured speech protocol: 9x18 claim matrices over a fixed vocabulary.

A speech is reduced to a matrix of claim modalities: row n holds what the
speaker asserted about player n, one cell per attribute.  The same shape is
used both for features extracted from heard speech and for the instructions
a policy hands to a speech generator.  The template renderer and the parser
are exact inverses over the canonical grammar; the parser additionally
accepts the JSON claim form ``{"identities": ..., "actions": ...}``.
"""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

N_PLAYERS = 9
M_ATTRIBUTES = 18


class Attribute(IntEnum):
    WEREWOLF = 0
    GOOD = 1
    VOTE = 2
    SEER = 3
    WITCH = 4
    GOLD_WATER = 5
    CHECK = 6
    POISON = 7
    VILLAGER = 8
    WOLVES_TARGET = 9
    HUNTER = 10
    SILVER_WATER = 11
    SUICIDE = 12
    UNCERTAIN_IDENTITY = 13
    SHOOT = 14
    SAVE = 15
    ABSTAIN_VOTING = 16
    SPECIAL_ROLE = 17


class Modality(IntEnum):
    UNMENTIONED = 0
    IS = 1
    MIGHT_BE = 2
    IS_NOT = 3
    MIGHT_NOT_BE = 4
    NOT_SURE = 5


ATTRIBUTE_NAMES = [a.name.lower() for a in Attribute]
MODALITY_NAMES = [m.name.lower() for m in Modality]

# claims whose subject is the target row itself (identity-style)
SUBJECT_ATTRS = (
    Attribute.WEREWOLF, Attribute.GOOD, Attribute.SEER, Attribute.WITCH,
    Attribute.GOLD_WATER, Attribute.VILLAGER, Attribute.WOLVES_TARGET,
    Attribute.HUNTER, Attribute.SILVER_WATER, Attribute.SUICIDE,
    Attribute.UNCERTAIN_IDENTITY, Attribute.ABSTAIN_VOTING, Attribute.SPECIAL_ROLE,
)
# claims with the speaker as implicit subject and the target row as object
OBJECT_ATTRS = (
    Attribute.VOTE, Attribute.CHECK, Attribute.POISON,
    Attribute.SHOOT, Attribute.SAVE,
)

SPEECH_KINDS = ("first", "second", "last_words")


@dataclass(frozen=True)
class SpeechHeader:
    day: int
    kind: str  # first | second | last_words
    order: int

    def __post_init__(self):
        if self.kind not in SPEECH_KINDS:
            raise ValueError(f"bad speech kind {self.kind!r}")

    def to_wire(self) -> dict:
        return {"day": self.day, "kind": self.kind, "order": self.order}

    @staticmethod
    def from_wire(d: dict) -> "SpeechHeader":
        return SpeechHeader(int(d["day"]), str(d["kind"]), int(d["order"]))


class FeatureMatrix:
    """9x18 grid of claim modalities, with speaker and speech header."""

    __slots__ = ("speaker", "header", "cells")

    def __init__(self, speaker: int, header: Optional[SpeechHeader] = None,
                 cells: Optional[np.ndarray] = None):
        self.speaker = speaker
        self.header = header
        if cells is None:
            cells = np.zeros((N_PLAYERS, M_ATTRIBUTES), dtype=np.uint8)
        else:
            cells = np.asarray(cells, dtype=np.uint8)
            if cells.shape != (N_PLAYERS, M_ATTRIBUTES):
                raise ValueError(f"cells must be {N_PLAYERS}x{M_ATTRIBUTES}")
        self.cells = cells

    def get(self, seat: int, attr: Attribute) -> Modality:
        return Modality(int(self.cells[seat - 1, attr]))

    def set(self, seat: int, attr: Attribute, modality: Modality) -> "FeatureMatrix":
        self.cells[seat - 1, attr] = int(modality)
        return self

    def mentioned(self) -> list[tuple[int, Attribute, Modality]]:
        out = []
        for r, a in zip(*np.nonzero(self.cells)):
            out.append((int(r) + 1, Attribute(int(a)), Modality(int(self.cells[r, a]))))
        return out

    def is_empty(self) -> bool:
        return not self.cells.any()

    def copy(self) -> "FeatureMatrix":
        return FeatureMatrix(self.speaker, self.header, self.cells.copy())

    def with_speaker_header(self, speaker: int, header: Optional[SpeechHeader]) -> "FeatureMatrix":
        return FeatureMatrix(speaker, header, self.cells.copy())

    def __eq__(self, other) -> bool:
        return (isinstance(other, FeatureMatrix)
                and self.speaker == other.speaker
                and self.header == other.header
                and np.array_equal(self.cells, other.cells))

    def __repr__(self) -> str:
        claims = ", ".join(f"{s}:{a.name}={m.name}" for s, a, m in self.mentioned())
        return f"FeatureMatrix(speaker={self.speaker}, [{claims}])"

    def to_wire(self) -> dict:
        return {
            "speaker": self.speaker,
            "header": self.header.to_wire() if self.header else None,
            "cells": [[s, ATTRIBUTE_NAMES[a], MODALITY_NAMES[m]]
                      for s, a, m in self.mentioned()],
        }

    @staticmethod
    def from_wire(d: dict) -> "FeatureMatrix":
        header = SpeechHeader.from_wire(d["header"]) if d.get("header") else None
        fm = FeatureMatrix(int(d["speaker"]), header)
        for seat, attr_name, mod_name in d.get("cells", []):
            fm.set(int(seat), Attribute(ATTRIBUTE_NAMES.index(attr_name)),
                   Modality(MODALITY_NAMES.index(mod_name)))
        return fm


SpeechInstruction = FeatureMatrix  # same structure, different direction of use


class FeatureHistory:
    """Most recent speech features, kept per speaker with a fixed capacity."""

    CAPACITY = 10

    def __init__(self):
        self._by_speaker: dict[int, deque] = {}

    def add(self, fm: FeatureMatrix) -> None:
        q = self._by_speaker.setdefault(fm.speaker, deque(maxlen=self.CAPACITY))
        q.append(fm)

    def for_speaker(self, seat: int) -> tuple[FeatureMatrix, ...]:
        return tuple(self._by_speaker.get(seat, ()))

    def all_records(self) -> list[FeatureMatrix]:
        out: list[FeatureMatrix] = []
        for q in self._by_speaker.values():
            out.extend(q)
        return out

    @staticmethod
    def from_speeches(speeches: Iterable[FeatureMatrix]) -> "FeatureHistory":
        h = FeatureHistory()
        for fm in speeches:
            h.add(fm)
        return h


# ----------------------------------------------------------------- renderer

_PREDICATES = {
    Attribute.WEREWOLF: "a werewolf",
    Attribute.GOOD: "a good person",
    Attribute.SEER: "the Seer",
    Attribute.WITCH: "the Witch",
    Attribute.GOLD_WATER: "gold water",
    Attribute.VILLAGER: "a villager",
    Attribute.WOLVES_TARGET: "the werewolves' target",
    Attribute.HUNTER: "the Hunter",
    Attribute.SILVER_WATER: "silver water",
    Attribute.SPECIAL_ROLE: "a special role",
}

_VERBS = {  # (present, past) forms for object-style claims
    Attribute.VOTE: ("vote for", "will vote for"),
    Attribute.CHECK: ("check", "checked"),
    Attribute.POISON: ("poison", "poisoned"),
    Attribute.SHOOT: ("shoot", "will shoot"),
    Attribute.SAVE: ("save", "saved"),
}

FILLER_TEXT = "I have nothing to add."


def _subject_templates(attr: Attribute) -> dict[tuple[Modality, bool], str]:
    """Templates keyed by (modality, is_self). {n} marks the target seat."""
    if attr in _PREDICATES:
        p = _PREDICATES[attr]
        return {
            (Modality.IS, False): f"Player {{n}} is {p}.",
            (Modality.IS, True): f"I am {p}.",
            (Modality.MIGHT_BE, False): f"Player {{n}} might be {p}.",
            (Modality.MIGHT_BE, True): f"I might be {p}.",
            (Modality.IS_NOT, False): f"Player {{n}} is not {p}.",
            (Modality.IS_NOT, True): f"I am not {p}.",
            (Modality.MIGHT_NOT_BE, False): f"Player {{n}} might not be {p}.",
            (Modality.MIGHT_NOT_BE, True): f"I might not be {p}.",
            (Modality.NOT_SURE, False): f"I am not sure whether Player {{n}} is {p}.",
            (Modality.NOT_SURE, True): f"I am not sure whether I am {p}.",
        }
    if attr == Attribute.SUICIDE:
        return {
            (Modality.IS, False): "Player {n} self-destructed.",
            (Modality.IS, True): "I will self-destruct.",
            (Modality.MIGHT_BE, False): "Player {n} might have self-destructed.",
            (Modality.MIGHT_BE, True): "I might self-destruct.",
            (Modality.IS_NOT, False): "Player {n} did not self-destruct.",
            (Modality.IS_NOT, True): "I will not self-destruct.",
            (Modality.MIGHT_NOT_BE, False): "Player {n} might not have self-destructed.",
            (Modality.MIGHT_NOT_BE, True): "I might not self-destruct.",
            (Modality.NOT_SURE, False): "I am not sure whether Player {n} self-destructed.",
            (Modality.NOT_SURE, True): "I am not sure whether I will self-destruct.",
        }
    if attr == Attribute.ABSTAIN_VOTING:
        return {
            (Modality.IS, False): "Player {n} abstained from voting.",
            (Modality.IS, True): "I will abstain from voting.",
            (Modality.MIGHT_BE, False): "Player {n} might have abstained from voting.",
            (Modality.MIGHT_BE, True): "I might abstain from voting.",
            (Modality.IS_NOT, False): "Player {n} did not abstain from voting.",
            (Modality.IS_NOT, True): "I will not abstain from voting.",
            (Modality.MIGHT_NOT_BE, False): "Player {n} might not have abstained from voting.",
            (Modality.MIGHT_NOT_BE, True): "I might not abstain from voting.",
            (Modality.NOT_SURE, False): "I am not sure whether Player {n} abstained from voting.",
            (Modality.NOT_SURE, True): "I am not sure whether I will abstain from voting.",
        }
    if attr == Attribute.UNCERTAIN_IDENTITY:
        return {
            (Modality.IS, False): "Player {n}'s identity is unclear.",
            (Modality.IS, True): "My identity is unclear.",
            (Modality.MIGHT_BE, False): "Player {n}'s identity might be unclear.",
            (Modality.MIGHT_BE, True): "My identity might be unclear.",
            (Modality.IS_NOT, False): "Player {n}'s identity is not unclear.",
            (Modality.IS_NOT, True): "My identity is not unclear.",
            (Modality.MIGHT_NOT_BE, False): "Player {n}'s identity might not be unclear.",
            (Modality.MIGHT_NOT_BE, True): "My identity might not be unclear.",
            (Modality.NOT_SURE, False): "I am not sure about Player {n}'s identity.",
            (Modality.NOT_SURE, True): "I am not sure about my identity.",
        }
    raise KeyError(attr)


def _object_templates(attr: Attribute) -> dict[Modality, str]:
    present, lead = _VERBS[attr]
    return {
        Modality.IS: f"I {lead} Player {{n}}.",
        Modality.MIGHT_BE: f"I might {present} Player {{n}}.",
        Modality.IS_NOT: f"I will not {present} Player {{n}}.",
        Modality.MIGHT_NOT_BE: f"I might not {present} Player {{n}}.",
        Modality.NOT_SURE: f"I am not sure whether I {lead} Player {{n}}.",
    }


def _build_tables():
    render_tab: dict[tuple[Attribute, Modality, bool], str] = {}
    parse_tab: dict[str, tuple[Attribute, Modality, str]] = {}
    for attr in SUBJECT_ATTRS:
        for (mod, is_self), tpl in _subject_templates(attr).items():
            render_tab[(attr, mod, is_self)] = tpl
            form = "self" if is_self else "other"
            if tpl in parse_tab and parse_tab[tpl][:2] != (attr, mod):
                raise AssertionError(f"ambiguous template {tpl!r}")
            parse_tab[tpl] = (attr, mod, form)
    for attr in OBJECT_ATTRS:
        for mod, tpl in _object_templates(attr).items():
            render_tab[(attr, mod, False)] = tpl
            render_tab[(attr, mod, True)] = tpl
            if tpl in parse_tab and parse_tab[tpl][:2] != (attr, mod):
                raise AssertionError(f"ambiguous template {tpl!r}")
            parse_tab[tpl] = (attr, mod, "object")
    return render_tab, parse_tab


_RENDER_TABLE, _PARSE_TABLE = _build_tables()
_PLAYER_RE = re.compile(r"Player ([1-9])\b")


def render(instruction: SpeechInstruction, obs=None) -> str:
    """Deterministic canonical text for an instruction.

    One clause per mentioned cell: self-claims, then claims about others by
    seat, then the speaker's action declarations.  Total on any instruction;
    legality of the claims is not the renderer's concern.
    """
    if obs is not None and getattr(obs, "viewer", instruction.speaker) != instruction.speaker:
        raise ValueError("instruction speaker must match the observer")
    me = instruction.speaker
    mentioned = instruction.mentioned()
    self_claims = [(s, a, m) for s, a, m in mentioned if s == me and a in SUBJECT_ATTRS]
    others = [(s, a, m) for s, a, m in mentioned if s != me and a in SUBJECT_ATTRS]
    actions = [(s, a, m) for s, a, m in mentioned if a in OBJECT_ATTRS]
    clauses = []
    for s, a, m in sorted(self_claims, key=lambda c: c[1]):
        clauses.append(_RENDER_TABLE[(a, m, True)].format(n=s))
    for s, a, m in sorted(others, key=lambda c: (c[0], c[1])):
        clauses.append(_RENDER_TABLE[(a, m, False)].format(n=s))
    for s, a, m in sorted(actions, key=lambda c: (c[0], c[1])):
        clauses.append(_RENDER_TABLE[(a, m, False)].format(n=s))
    return " ".join(clauses) if clauses else FILLER_TEXT


class ParseError(ValueError):
    """Malformed JSON claim form; `offset` is the failing byte position."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


# alias table for JSON claim keys: (phrase, attribute, forced modality or None)
# longer phrases first so e.g. "werewolves' target" wins over "werewolf"
_KEY_ALIASES: list[tuple[str, Attribute, Optional[Modality]]] = [
    ("werewolves' target", Attribute.WOLVES_TARGET, None),
    ("werewolves target", Attribute.WOLVES_TARGET, None),
    ("wolves' target", Attribute.WOLVES_TARGET, None),
    ("uncertain identity", Attribute.UNCERTAIN_IDENTITY, Modality.NOT_SURE),
    ("special role", Attribute.SPECIAL_ROLE, None),
    ("abstain", Attribute.ABSTAIN_VOTING, None),
    ("self-destruct", Attribute.SUICIDE, None),
    ("self destruct", Attribute.SUICIDE, None),
    ("gold water", Attribute.GOLD_WATER, None),
    ("silver water", Attribute.SILVER_WATER, None),
    ("suspicious", Attribute.WEREWOLF, Modality.MIGHT_BE),
    ("suspect", Attribute.WEREWOLF, Modality.MIGHT_BE),
    ("credible", Attribute.GOOD, Modality.MIGHT_BE),
    ("villager", Attribute.VILLAGER, None),
    ("civilian", Attribute.VILLAGER, None),
    ("werewolf", Attribute.WEREWOLF, None),
    ("suicide", Attribute.SUICIDE, None),
    ("explode", Attribute.SUICIDE, None),
    ("prophet", Attribute.SEER, None),
    ("inspect", Attribute.CHECK, None),
    ("verif", Attribute.CHECK, None),
    ("hunter", Attribute.HUNTER, None),
    ("poison", Attribute.POISON, None),
    ("shoot", Attribute.SHOOT, None),
    ("check", Attribute.CHECK, None),
    ("witch", Attribute.WITCH, None),
    ("wolf", Attribute.WEREWOLF, None),
    ("seer", Attribute.SEER, None),
    ("save", Attribute.SAVE, None),
    ("vote", Attribute.VOTE, None),
    ("good", Attribute.GOOD, None),
    ("gold", Attribute.GOLD_WATER, None),
    ("silver", Attribute.SILVER_WATER, None),
]


def _classify_key(key: str) -> Optional[tuple[Attribute, Modality]]:
    k = key.lower().strip()
    attr = None
    forced = None
    for phrase, a, m in _KEY_ALIASES:
        if phrase in k:
            attr, forced = a, m
            break
    if attr is None:
        return None
    if forced is not None:
        return attr, forced
    if "not sure" in k or "unsure" in k:
        mod = Modality.NOT_SURE
    elif re.search(r"\b(might not|may not|probably not)\b", k):
        mod = Modality.MIGHT_NOT_BE
    elif re.search(r"\b(not|no|isn't|impossible)\b", k):
        mod = Modality.IS_NOT
    elif re.search(r"\b(maybe|might|may|seems|seem|probably|like)\b", k):
        mod = Modality.MIGHT_BE
    else:
        mod = Modality.IS
    return attr, mod


_ARROW_RE = re.compile(r"^\s*(unknown|[1-9])\s*->\s*([1-9])\s*$")
_FRAGMENT_RE = re.compile(r"[\"']?([^:{}\[\]\"',]+)[\"']?\s*:\s*\[([^\]]*)\]")


def _apply_claim(fm: FeatureMatrix, speaker: int, attr: Attribute, mod: Modality,
                 item) -> None:
    """Record one claim item: a seat number, [s, o] pair, or 's->o' string."""
    subject, obj = speaker, None
    if isinstance(item, (list, tuple)) and len(item) == 2:
        subject, obj = item
    elif isinstance(item, str):
        m = _ARROW_RE.match(item)
        if m:
            subject = speaker if m.group(1) == "unknown" else int(m.group(1))
            obj = int(m.group(2))
        elif item.strip().isdigit():
            obj = int(item.strip())
        else:
            return
    elif isinstance(item, (int, float)) and not isinstance(item, bool):
        obj = int(item)
    if obj is None or not (1 <= int(obj) <= N_PLAYERS):
        return
    obj = int(obj)
    try:
        subject = speaker if subject in (None, "unknown") else int(subject)
    except (TypeError, ValueError):
        subject = speaker
    if attr in OBJECT_ATTRS and subject != speaker:
        mod = Modality.MIGHT_BE  # third-party action claims are hearsay
    fm.set(obj, attr, mod)


def _parse_claim_dict(d: dict, fm: FeatureMatrix) -> None:
    for section in ("identities", "actions"):
        sec = d.get(section)
        if not isinstance(sec, dict):
            continue
        for key, items in sec.items():
            got = _classify_key(str(key))
            if got is None:
                continue
            attr, mod = got
            if not isinstance(items, (list, tuple)):
                items = [items]
            for item in items:
                _apply_claim(fm, fm.speaker, attr, mod, item)


def parse(text, speaker: int, header: Optional[SpeechHeader] = None) -> FeatureMatrix:
    """Extract a FeatureMatrix from canonical text or the JSON claim form.

    Unrecognized spans are ignored.  Never raises on arbitrary input except
    ParseError for a malformed JSON body (leading '{').
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    text = str(text)
    fm = FeatureMatrix(speaker, header)
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ParseError(f"malformed claim JSON: {e.msg}", offset=e.pos) from e
        if isinstance(data, dict):
            _parse_claim_dict(data, fm)
        return fm
    # canonical clause grammar
    for raw in text.split("."):
        clause = raw.strip()
        if not clause:
            continue
        clause += "."
        m = _PLAYER_RE.search(clause)
        target = int(m.group(1)) if m else None
        normalized = _PLAYER_RE.sub("Player {n}", clause)
        hit = _PARSE_TABLE.get(normalized)
        if hit is None:
            continue
        attr, mod, form = hit
        if form == "self":
            fm.set(speaker, attr, mod)
        elif target is not None:
            fm.set(target, attr, mod)
    # JSON-ish fragments like "seems to be a werewolf: [3, 6]"
    for frag in _FRAGMENT_RE.finditer(text):
        got = _classify_key(frag.group(1))
        if got is None:
            continue
        attr, mod = got
        for item in frag.group(2).split(","):
            item = item.strip().strip("\"'")
            if item:
                _apply_claim(fm, speaker, attr, mod, item)
    return fm


# ------------------------------------------------------------------ filter

@dataclass
class FilterVerdict:
    accepted: bool
    mismatches: list[tuple[int, Attribute, Modality, Modality]] = field(default_factory=list)
    attempts_used: int = 0


def filter_check(instruction: SpeechInstruction, produced: FeatureMatrix) -> FilterVerdict:
    """Speech filter: exact match on the speaker's own row, consistency on
    instructed cells about others, leeway on everything uninstructed there."""
    if instruction.speaker != produced.speaker:
        raise ValueError("filter_check requires matching speakers")
    me = instruction.speaker
    mismatches: list[tuple[int, Attribute, Modality, Modality]] = []
    for attr in Attribute:
        want = instruction.get(me, attr)
        got = produced.get(me, attr)
        if want != got:
            mismatches.append((me, attr, want, got))
    for seat in range(1, N_PLAYERS + 1):
        if seat == me:
            continue
        for attr in Attribute:
            want = instruction.get(seat, attr)
            if want != Modality.UNMENTIONED and produced.get(seat, attr) != want:
                mismatches.append((seat, attr, want, produced.get(seat, attr)))
    return FilterVerdict(accepted=not mismatches, mismatches=mismatches)


@dataclass
class SpeechResult:
    text: str
    instruction: SpeechInstruction  # the claims actually made (fallback's own on fallback)
    attempts_used: int
    accepted: bool
    fell_back: bool


def generate_with_retries(instruction: SpeechInstruction,
                          presenter: Callable,
                          max_attempts: int,
                          obs=None,
                          identity_probs=None,
                          listener: Optional[Callable] = None) -> SpeechResult:
    """Presenter -> listener -> filter loop with a rule-based safety net.

    `presenter(instruction, obs) -> text`; transport errors count as failed
    attempts.  `listener(text, speaker, header) -> FeatureMatrix` defaults to
    the canonical parser.  After max_attempts rejected attempts the rule-based
    fallback speech is rendered instead.
    """
    listen = listener or parse
    attempts = 0
    while attempts < max_attempts:
        attempts += 1
        try:
            text = presenter(instruction, obs)
            produced = listen(text, instruction.speaker, instruction.header)
            verdict = filter_check(instruction, produced)
        except Exception:
            continue
        if verdict.accepted:
            verdict.attempts_used = attempts
            return SpeechResult(text=text, instruction=instruction,
                                attempts_used=attempts, accepted=True, fell_back=False)
    fb = fallback_rule_speech(obs, identity_probs)
    fb = fb.with_speaker_header(instruction.speaker, instruction.header)
    return SpeechResult(text=render(fb), instruction=fb,
                        attempts_used=attempts, accepted=False, fell_back=True)


def template_presenter(instruction: SpeechInstruction, obs=None) -> str:
    """The built-in Presenter: canonical template realization (exact by construction)."""
    return render(instruction, obs)


# ---------------------------------------------------------------- fallback

ROLE_ORDER = ("villager", "seer", "witch", "hunter", "werewolf")
WOLF_COL = ROLE_ORDER.index("werewolf")


def fallback_rule_speech(obs, identity_probs=None) -> SpeechInstruction:
    """Rule-based speech from role, recorded skills, and identity predictions.

    Seer reports the latest check, Witch reports potion use, other good roles
    claim good and accuse the most wolf-like living seat, wolves claim
    villager and never self-incriminate.
    """
    me = obs.viewer
    role = getattr(obs.role, "value", obs.role)
    living = [s for s in range(1, N_PLAYERS + 1) if obs.alive[s]]
    if identity_probs is None:
        probs = np.full((N_PLAYERS, len(ROLE_ORDER)), 1.0 / len(ROLE_ORDER))
    else:
        probs = np.asarray(identity_probs, dtype=float)

    def most_wolfish(candidates: Sequence[int]) -> Optional[int]:
        best, best_p = None, -1.0
        for s in candidates:
            p = float(probs[s - 1, WOLF_COL])
            if p > best_p:
                best, best_p = s, p
        return best

    inst = FeatureMatrix(me)
    if role == "seer":
        inst.set(me, Attribute.SEER, Modality.IS)
        if obs.seer_checks:
            target, is_wolf = obs.seer_checks[-1]
            inst.set(target, Attribute.CHECK, Modality.IS)
            inst.set(target,
                     Attribute.WEREWOLF if is_wolf else Attribute.GOLD_WATER,
                     Modality.IS)
    elif role == "witch":
        inst.set(me, Attribute.WITCH, Modality.IS)
        if obs.witch_saved is not None:
            inst.set(obs.witch_saved, Attribute.SAVE, Modality.IS)
        if obs.witch_poisoned is not None:
            inst.set(obs.witch_poisoned, Attribute.POISON, Modality.IS)
    elif role == "werewolf":
        inst.set(me, Attribute.VILLAGER, Modality.IS)
        mates = set(getattr(obs, "teammates", ()))
        target = most_wolfish([s for s in living if s != me and s not in mates])
        if target is not None:
            inst.set(target, Attribute.WEREWOLF, Modality.IS)
    else:  # hunter, villager
        inst.set(me, Attribute.GOOD, Modality.IS)
        target = most_wolfish([s for s in living if s != me])
        if target is not None:
            inst.set(target, Attribute.WEREWOLF, Modality.IS)
    return inst


def random_instruction(rng, speaker: Optional[int] = None,
                       header: Optional[SpeechHeader] = None,
                       max_claims: int = 12) -> SpeechInstruction:
    """Uniformly random sparse instruction (test and fuzz helper)."""
    me = speaker if speaker is not None else rng.randrange(1, N_PLAYERS + 1)
    fm = FeatureMatrix(me, header)
    for _ in range(rng.randrange(0, max_claims + 1)):
        seat = rng.randrange(1, N_PLAYERS + 1)
        attr = Attribute(rng.randrange(M_ATTRIBUTES))
        mod = Modality(rng.randrange(1, 6))
        fm.set(seat, attr, mod)
    return fm
