"""Network tests: equivariance, masking, determinism, gradients, sampling."""
from __future__ import annotations

import random

import numpy as np
import pytest

from werewolf9 import engine as E
from werewolf9 import protocol as P
from werewolf9.engine import Decision, DecisionType
from werewolf9.policy import (SpeechTape, ThinkerConfig, ThinkerParams, encode,
                              forward, index_to_action, legal_mask,
                              sample_action, sample_instruction)
from werewolf9.policy import thinker as T
from werewolf9.policy.nets import Adam, Mlp, masked_log_softmax
from werewolf9.policy.thinker import BatchInputs, ObsSnapshot
from werewolf9.training.scripted import ScriptedAgent

TINY = ThinkerConfig(row_hidden=8, row_out=6, player_hidden=10, player_out=8,
                     global_hidden=10, global_out=8, head_hidden=6,
                     instr_hidden=8, seed=11)


def play_until(game, n_speeches, rng):
    agents = {s: ScriptedAgent(s) for s in E.SEATS}
    spoken = 0
    while not game.over and spoken < n_speeches:
        for dec in list(game.pending()):
            obs = E.observe(game, dec.seat)
            if dec.kind == DecisionType.SPEECH:
                game.submit_speech(dec.seat, agents[dec.seat].speak(obs, dec))
                spoken += 1
            else:
                game.submit(dec.seat, agents[dec.seat].decide(obs, dec))
    return game


def snapshot_of(game, seat, decision):
    obs = E.observe(game, seat)
    tape = SpeechTape()
    return ObsSnapshot.capture(obs, tape, decision), obs


def permute_snapshot(snap: ObsSnapshot, perm: dict[int, int]) -> ObsSnapshot:
    tape2 = SpeechTape()
    src = snap.tape
    for i in range(snap.cutoff):
        # rebuild the record with rows moved to their new seats
        old_block = src.blocks[i]
        cells = np.zeros((9, 18), dtype=np.uint8)
        onehot = old_block[:, :P.M_ATTRIBUTES * 6].reshape(9, 18, 6)
        for s in range(1, 10):
            cells[perm[s] - 1] = onehot[s - 1].argmax(axis=1)
        hdr_day = int(old_block[0, 109:119].argmax()) + 1
        hdr_kind = ("first", "second", "last_words")[int(old_block[0, 119:122].argmax())]
        hdr_order = int(old_block[0, 122:131].argmax())
        fm = P.FeatureMatrix(perm[src.speakers[i]],
                             P.SpeechHeader(hdr_day, hdr_kind, hdr_order), cells)
        tape2.append(fm)
    pub2 = np.zeros_like(snap.pub)
    for s in range(1, 10):
        pub2[perm[s] - 1] = snap.pub[s - 1]
    return ObsSnapshot(tape=tape2, cutoff=snap.cutoff, pub=pub2, ctx=snap.ctx.copy())


def test_seat_permutation_equivariance():
    params = ThinkerParams(TINY)
    perm = {s: s for s in E.SEATS}
    perm[2], perm[7] = 7, 2
    rng = random.Random(1)
    for seed in range(6):
        game = play_until(E.new_game(seed), n_speeches=7 + seed, rng=rng)
        if game.over:
            continue
        dec = game.pending()[0]
        snap, _ = snapshot_of(game, dec.seat, dec)
        snap_p = permute_snapshot(snap, perm)
        c1 = T.trunk_forward(params, BatchInputs([snap]))
        c2 = T.trunk_forward(params, BatchInputs([snap_p]))
        for s in E.SEATS:
            np.testing.assert_allclose(c2.player_emb[0, perm[s] - 1],
                                       c1.player_emb[0, s - 1], atol=1e-12)
        np.testing.assert_allclose(c2.g, c1.g, atol=1e-12)
        id1, _ = T.identity_forward(params, c1.player_emb, c1.g)
        id2, _ = T.identity_forward(params, c2.player_emb, c2.g)
        for s in E.SEATS:
            np.testing.assert_allclose(id2[0, perm[s] - 1], id1[0, s - 1], atol=1e-12)
        l1, _ = T.seat_head_forward(params, DecisionType.VOTE, c1.player_emb, c1.g)
        l2, _ = T.seat_head_forward(params, DecisionType.VOTE, c2.player_emb, c2.g)
        for s in E.SEATS:
            np.testing.assert_allclose(l2[0, perm[s] - 1], l1[0, s - 1], atol=1e-12)
        np.testing.assert_allclose(l2[0, 9:], l1[0, 9:], atol=1e-12)  # abstain slot
        i1, _ = T.instr_head_forward(params, c1.player_emb, c1.g)
        i2, _ = T.instr_head_forward(params, c2.player_emb, c2.g)
        for s in E.SEATS:
            np.testing.assert_allclose(i2[0, perm[s] - 1], i1[0, s - 1], atol=1e-12)


def test_forward_deterministic_and_masked():
    params = ThinkerParams(TINY)
    game = E.new_game(4)
    dec = game.pending()[0]
    obs = E.observe(game, dec.seat)
    out1 = forward(params, obs, dec, SpeechTape())
    out2 = forward(params, obs, dec, SpeechTape())
    assert np.array_equal(out1.action_logits, out2.action_logits)
    assert out1.value == out2.value
    # all nine seats are legal kill targets on night one
    assert np.isfinite(out1.action_logits).sum() == 9


def test_masking_invariance():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(1, 10))
    mask = np.array([[True, False, True, True, False, True, True, True, False, True]])
    base = masked_log_softmax(logits, mask)
    for _ in range(20):
        perturbed = logits.copy()
        perturbed[0, ~mask[0]] = rng.normal(size=(~mask[0]).sum()) * 100
        got = masked_log_softmax(perturbed, mask)
        np.testing.assert_array_equal(got[0, mask[0]], base[0, mask[0]])
        assert np.all(np.isneginf(got[0, ~mask[0]]))


def test_seer_decision_has_only_legal_targets():
    params = ThinkerParams(TINY)
    game = E.new_game(9, {1: E.Role.SEER, 2: E.Role.WITCH, 3: E.Role.HUNTER,
                          4: E.Role.VILLAGER, 5: E.Role.VILLAGER, 6: E.Role.VILLAGER,
                          7: E.Role.WEREWOLF, 8: E.Role.WEREWOLF, 9: E.Role.WEREWOLF})
    E.wolf_kill_round(game, {7: 5, 8: 5, 9: 5}, 1)
    E.wolf_kill_round(game, {7: 5, 8: 5, 9: 5}, 2)
    E.wolf_kill_round(game, {7: 5, 8: 5, 9: 5}, 3)
    (witch_dec,) = game.pending()
    game.submit(2, E.Action("pass"))
    (dec,) = game.pending()
    assert dec.kind == DecisionType.SEER
    out = forward(params, E.observe(game, 1), dec, SpeechTape())
    finite = np.flatnonzero(np.isfinite(out.action_logits))
    assert set(finite + 1) == {a.target for a in dec.options}
    assert 1 not in set(finite + 1)


def test_forward_rejects_empty_legal_set():
    params = ThinkerParams(TINY)
    game = E.new_game(4)
    dec = game.pending()[0]
    fake = Decision(seat=dec.seat, kind=DecisionType.VOTE, options=())
    with pytest.raises(ValueError):
        forward(params, E.observe(game, dec.seat), fake, SpeechTape())


def test_identity_rows_sum_to_one_and_value_finite():
    params = ThinkerParams(TINY)
    rng = random.Random(0)
    checked = 0
    for seed in range(8):
        game = play_until(E.new_game(seed), n_speeches=seed, rng=rng)
        if game.over:
            continue
        for dec in game.pending():
            out = forward(params, E.observe(game, dec.seat), dec, SpeechTape())
            np.testing.assert_allclose(out.identity.sum(axis=1), np.ones(9), atol=1e-9)
            assert np.isfinite(out.value)
            checked += 1
    assert checked >= 5


def test_sample_action_edge_cases():
    mask = np.zeros(10, dtype=bool)
    mask[4] = True
    out = T.ForwardOutput(decision=None, action_logits=np.where(mask, 0.0, -np.inf),
                          mask=mask, instr_logits=None, identity=np.full((9, 5), 0.2),
                          value=0.0)
    idx, lp = sample_action(out, 1.0, np.random.default_rng(0))
    assert idx == 4 and lp == 0.0
    mask2 = np.ones(5, dtype=bool)
    logits = np.array([0.1, 3.0, -1.0, 0.0, 1.0])
    out2 = T.ForwardOutput(decision=None, action_logits=logits, mask=mask2,
                           instr_logits=None, identity=np.full((9, 5), 0.2), value=0.0)
    idx, lp = sample_action(out2, 0.0, np.random.default_rng(0))
    assert idx == 1 and lp == 0.0


def test_sample_action_frequencies_match_softmax():
    rng = np.random.default_rng(7)
    logits = np.array([1.0, 0.0, -1.0, 2.0, -np.inf, -np.inf])
    mask = np.isfinite(logits)
    out = T.ForwardOutput(decision=None, action_logits=logits, mask=mask,
                          instr_logits=None, identity=np.full((9, 5), 0.2), value=0.0)
    n = 100_000
    counts = np.zeros(6)
    for _ in range(n):
        idx, _ = sample_action(out, 1.0, rng)
        counts[idx] += 1
    z = np.exp(logits[mask] - logits[mask].max())
    expect = z / z.sum()
    np.testing.assert_allclose(counts[mask] / n, expect, atol=0.01)
    assert counts[~mask].sum() == 0


def test_encode_zero_history_and_duplicate_invariance():
    params = ThinkerParams(TINY)
    game = E.new_game(2)
    obs = E.observe(game, 1)
    emb = encode(params, obs)
    assert np.allclose(emb["speech"], 0.0)
    # duplicated identical features leave the speaker's speech embedding alone
    fm = P.random_instruction(random.Random(1), speaker=3,
                              header=P.SpeechHeader(1, "first", 0))
    hist1 = P.FeatureHistory.from_speeches([fm])
    hist5 = P.FeatureHistory.from_speeches([fm] * 5)
    e1 = encode(params, obs, hist=hist1)
    e5 = encode(params, obs, hist=hist5)
    np.testing.assert_allclose(e1["speech"][2], e5["speech"][2], atol=1e-12)


def test_history_capacity_is_ten():
    hist = P.FeatureHistory()
    rng = random.Random(2)
    items = [P.random_instruction(rng, speaker=4) for _ in range(14)]
    for fm in items:
        hist.add(fm)
    kept = hist.for_speaker(4)
    assert len(kept) == 10
    assert list(kept) == items[-10:]


def test_checkpoint_roundtrip(tmp_path):
    params = ThinkerParams(TINY)
    game = E.new_game(6)
    dec = game.pending()[0]
    obs = E.observe(game, dec.seat)
    out1 = forward(params, obs, dec, SpeechTape())
    path = tmp_path / "ckpt.npz"
    params.save(path, meta={"note": "test"})
    loaded = ThinkerParams.load(path)
    out2 = forward(loaded, obs, dec, SpeechTape())
    np.testing.assert_array_equal(out1.action_logits, out2.action_logits)
    assert out1.value == out2.value


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for trial in range(6):
        sizes = [int(rng.integers(3, 8)) for _ in range(3)] + [int(rng.integers(1, 4))]
        net = Mlp(f"t{trial}", sizes, rng)
        assert net.n_params() <= 1000
        x = rng.normal(size=(4, sizes[0]))
        w_out = rng.normal(size=(4, sizes[-1]))

        def loss_of():
            y, _ = net.forward(x)
            return float((w_out * y).sum() + 0.5 * (y ** 2).sum())

        net.zero_grads()
        y, cache = net.forward(x)
        net.backward(cache, w_out + y)
        h = 1e-6
        for _, w, gw in net.params():
            for ix in [np.unravel_index(i, w.shape)
                       for i in rng.choice(w.size, size=min(8, w.size), replace=False)]:
                orig = w[ix]
                w[ix] = orig + h
                lp = loss_of()
                w[ix] = orig - h
                lm = loss_of()
                w[ix] = orig
                fd = (lp - lm) / (2 * h)
                assert abs(fd - gw[ix]) / max(abs(fd), abs(gw[ix]), 1e-8) < 1e-4
