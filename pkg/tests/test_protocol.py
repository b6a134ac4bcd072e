"""Speech protocol tests: vocabulary, round trips, the filter, fallbacks."""
from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from werewolf9 import protocol as P
from werewolf9.protocol import (
    Attribute, FeatureMatrix, FilterVerdict, Modality, ParseError, SpeechHeader,
    fallback_rule_speech, filter_check, generate_with_retries, parse, render,
    random_instruction, template_presenter,
)

DATA = Path(__file__).parent / "data"


def test_vocabulary_is_fixed():
    assert P.M_ATTRIBUTES == 18 and len(Attribute) == 18
    assert P.ATTRIBUTE_NAMES == [
        "werewolf", "good", "vote", "seer", "witch", "gold_water", "check",
        "poison", "villager", "wolves_target", "hunter", "silver_water",
        "suicide", "uncertain_identity", "shoot", "save", "abstain_voting",
        "special_role",
    ]
    assert len(Modality) == 6 and Modality.UNMENTIONED == 0
    assert set(P.SUBJECT_ATTRS) | set(P.OBJECT_ATTRS) == set(Attribute)


def test_matrix_shape_and_wire_roundtrip():
    fm = FeatureMatrix(3, SpeechHeader(2, "second", 4))
    fm.set(5, Attribute.WEREWOLF, Modality.MIGHT_BE)
    fm.set(3, Attribute.VILLAGER, Modality.IS)
    assert fm.cells.shape == (9, 18)
    back = FeatureMatrix.from_wire(json.loads(json.dumps(fm.to_wire())))
    assert back == fm


def test_bad_header_kind_rejected():
    with pytest.raises(ValueError):
        SpeechHeader(1, "third", 0)


def test_render_golden_file():
    cases = json.loads((DATA / "render_golden.json").read_text())
    assert len(cases) >= 10
    for case in cases:
        fm = FeatureMatrix.from_wire(case["instruction"])
        assert render(fm) == case["text"]


def test_render_examples():
    fm = FeatureMatrix(1).set(1, Attribute.SEER, Modality.IS)
    fm.set(7, Attribute.GOLD_WATER, Modality.IS)
    assert render(fm) == "I am the Seer. Player 7 is gold water."
    assert render(FeatureMatrix(4)) == P.FILLER_TEXT
    assert parse(P.FILLER_TEXT, 4) == FeatureMatrix(4)
    # renderer is total, legality is not its concern
    assert "werewolf" in render(FeatureMatrix(2).set(2, Attribute.WEREWOLF, Modality.IS))


def test_roundtrip_bulk():
    rng = random.Random(99)
    for _ in range(3000):
        inst = random_instruction(rng)
        back = parse(render(inst), inst.speaker)
        assert np.array_equal(back.cells, inst.cells)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=200, deadline=None)
def test_roundtrip_property(seed):
    inst = random_instruction(random.Random(seed))
    back = parse(render(inst), inst.speaker)
    assert np.array_equal(back.cells, inst.cells)


@given(st.binary(max_size=300))
@settings(max_examples=300, deadline=None)
def test_parser_total_on_arbitrary_bytes(data):
    try:
        fm = parse(data, 1)
        assert isinstance(fm, FeatureMatrix)
    except ParseError as e:
        assert isinstance(e.offset, int)


def test_parse_json_claim_form():
    fm = parse('{"identities":{"werewolf":[3,5]},"actions":{"check":["1->6"]}}', 1)
    assert fm.get(3, Attribute.WEREWOLF) == Modality.IS
    assert fm.get(5, Attribute.WEREWOLF) == Modality.IS
    assert fm.get(6, Attribute.CHECK) == Modality.IS  # subject 1 is the speaker
    # third-party action claims downgrade to hearsay
    fm2 = parse('{"actions":{"check":["2->6"]}}', 1)
    assert fm2.get(6, Attribute.CHECK) == Modality.MIGHT_BE
    # pair form and unknown subject
    fm3 = parse('{"actions":{"vote":[[1, 4]], "poison": ["unknown->2"]}}', 1)
    assert fm3.get(4, Attribute.VOTE) == Modality.IS
    assert fm3.get(2, Attribute.POISON) == Modality.IS


def test_parse_hedged_fragment():
    fm = parse("seems to be a werewolf: [3]", 2)
    assert fm.get(3, Attribute.WEREWOLF) == Modality.MIGHT_BE
    fm = parse('"suspicious": [7], "gold water": [8]', 9)
    assert fm.get(7, Attribute.WEREWOLF) == Modality.MIGHT_BE
    assert fm.get(8, Attribute.GOLD_WATER) == Modality.IS


def test_parse_malformed_json_carries_offset():
    with pytest.raises(ParseError) as exc:
        parse('{"identities": {"werewolf": [3', 1)
    assert exc.value.offset > 0


def test_parse_ignores_unrecognized_spans():
    text = "Blah blah blah. I am the Seer. Something irrelevant entirely."
    fm = parse(text, 4)
    assert fm.get(4, Attribute.SEER) == Modality.IS
    assert len(fm.mentioned()) == 1


def test_filter_accepts_roundtrip_and_leeway():
    rng = random.Random(5)
    for _ in range(200):
        inst = random_instruction(rng)
        verdict = filter_check(inst, parse(render(inst), inst.speaker))
        assert verdict.accepted and not verdict.mismatches
    # leeway: extra claims about other players are tolerated
    inst = FeatureMatrix(1).set(1, Attribute.SEER, Modality.IS)
    produced = parse(render(inst), 1)
    produced.set(4, Attribute.WEREWOLF, Modality.IS)
    assert filter_check(inst, produced).accepted


def test_filter_rejects_self_row_deviations():
    inst = FeatureMatrix(2).set(2, Attribute.VILLAGER, Modality.IS)
    produced = FeatureMatrix(2).set(2, Attribute.SEER, Modality.IS)
    verdict = filter_check(inst, produced)
    assert not verdict.accepted and len(verdict.mismatches) == 2
    # extra unrequested self claims are rejected too
    produced2 = FeatureMatrix(2).set(2, Attribute.VILLAGER, Modality.IS)
    produced2.set(2, Attribute.GOOD, Modality.IS)
    assert not filter_check(inst, produced2).accepted


def test_filter_self_row_completeness_property():
    # flipping any instructed self cell in the produced matrix must reject
    rng = random.Random(17)
    flips = 0
    for _ in range(300):
        inst = random_instruction(rng)
        me = inst.speaker
        produced = parse(render(inst), me)
        self_cells = [(a, Modality(int(inst.cells[me - 1, a]))) for a in Attribute
                      if inst.cells[me - 1, a] != 0]
        if not self_cells:
            continue
        attr, mod = self_cells[rng.randrange(len(self_cells))]
        other = Modality((mod + 1 - 1) % 5 + 1)
        assert other != mod
        produced.set(me, attr, other)
        assert not filter_check(inst, produced).accepted
        flips += 1
    assert flips > 50


def test_filter_rejects_inconsistent_other_rows():
    inst = FeatureMatrix(1).set(4, Attribute.WEREWOLF, Modality.IS)
    produced = FeatureMatrix(1).set(4, Attribute.WEREWOLF, Modality.IS_NOT)
    verdict = filter_check(inst, produced)
    assert not verdict.accepted
    assert verdict.mismatches == [(4, Attribute.WEREWOLF, Modality.IS, Modality.IS_NOT)]


def test_generate_with_retries_template_first_attempt():
    inst = FeatureMatrix(3).set(3, Attribute.GOOD, Modality.IS)
    res = generate_with_retries(inst, template_presenter, max_attempts=5)
    assert res.accepted and res.attempts_used == 1 and not res.fell_back


class _Obs:
    def __init__(self, viewer, role, alive=None, checks=(), saved=None,
                 poisoned=None, teammates=()):
        self.viewer = viewer
        self.role = role
        self.alive = alive or {s: True for s in range(1, 10)}
        self.seer_checks = checks
        self.witch_saved = saved
        self.witch_poisoned = poisoned
        self.teammates = teammates


def test_generate_with_retries_exhaustion_falls_back():
    def adversarial(inst, obs):
        return "I am the Seer."  # always violates a non-seer self row

    inst = FeatureMatrix(5).set(5, Attribute.VILLAGER, Modality.IS)
    res = generate_with_retries(inst, adversarial, max_attempts=4,
                                obs=_Obs(5, "villager"))
    assert res.fell_back and res.attempts_used == 4 and not res.accepted
    assert res.instruction.get(5, Attribute.GOOD) == Modality.IS


def test_generate_with_retries_succeeds_on_third_attempt():
    calls = {"n": 0}

    def flaky(inst, obs):
        calls["n"] += 1
        if calls["n"] < 3:
            raise ConnectionError("transport down")
        return render(inst)

    inst = FeatureMatrix(6).set(6, Attribute.GOOD, Modality.IS)
    res = generate_with_retries(inst, flaky, max_attempts=3)
    assert res.accepted and res.attempts_used == 3 and not res.fell_back


def test_fallback_seer_reports_check():
    obs = _Obs(1, "seer", checks=((6, True),))
    inst = fallback_rule_speech(obs)
    assert inst.get(1, Attribute.SEER) == Modality.IS
    assert inst.get(6, Attribute.CHECK) == Modality.IS
    assert inst.get(6, Attribute.WEREWOLF) == Modality.IS
    obs2 = _Obs(1, "seer", checks=((6, True), (4, False)))
    inst2 = fallback_rule_speech(obs2)
    assert inst2.get(4, Attribute.GOLD_WATER) == Modality.IS


def test_fallback_witch_reports_potions():
    obs = _Obs(2, "witch", saved=5, poisoned=9)
    inst = fallback_rule_speech(obs)
    assert inst.get(2, Attribute.WITCH) == Modality.IS
    assert inst.get(5, Attribute.SAVE) == Modality.IS
    assert inst.get(9, Attribute.POISON) == Modality.IS


def test_fallback_wolf_never_self_incriminates():
    rng = random.Random(3)
    for _ in range(100):
        probs = np.abs(np.random.default_rng(rng.randrange(1 << 30)).normal(size=(9, 5)))
        probs /= probs.sum(axis=1, keepdims=True)
        obs = _Obs(4, "werewolf", teammates=(7, 9))
        inst = fallback_rule_speech(obs, probs)
        assert inst.get(4, Attribute.WEREWOLF) == Modality.UNMENTIONED
        assert inst.get(4, Attribute.VILLAGER) == Modality.IS
        accused = [s for s, a, m in inst.mentioned() if a == Attribute.WEREWOLF]
        assert all(s not in (4, 7, 9) for s in accused)


def test_fallback_villager_accuses_argmax():
    probs = np.full((9, 5), 0.1)
    probs[7, P.WOLF_COL] = 0.9  # seat 8
    obs = _Obs(3, "villager")
    inst = fallback_rule_speech(obs, probs)
    assert inst.get(3, Attribute.GOOD) == Modality.IS
    assert inst.get(8, Attribute.WEREWOLF) == Modality.IS
