"""Acceptance criteria, one test per criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s`.  Criteria 6 and 7 run a
desk-scale training session (roughly half an hour on a workstation); the
session-scoped fixtures below share the corpus and the trained models.
"""
from __future__ import annotations

import io
import json
import random
import time
from pathlib import Path

import numpy as np
import pytest

from werewolf9 import engine as E
from werewolf9 import protocol as P
from werewolf9.arena import AgentSpec, behavior_score, deduction_eval, play_faction_match
from werewolf9.engine import GameEvent, ReplayLog, Role, Winner
from werewolf9.policy import ThinkerConfig, ThinkerParams, SpeechTape
from werewolf9.policy import thinker as T
from werewolf9.policy.nets import Mlp
from werewolf9.policy.features import action_index
from werewolf9.service import Session, SeatBinding, create_app, event_visible_to
from werewolf9.training import (Trainer, TrainerConfig, compute_gae,
                                gen_scripted_dataset)
from werewolf9.training.samples import GOOD, WOLF

from helpers import build_paper_game, paper_log_lines

ROLES = {1: Role.SEER, 2: Role.WITCH, 3: Role.HUNTER, 4: Role.VILLAGER,
         5: Role.VILLAGER, 6: Role.VILLAGER, 7: Role.WEREWOLF,
         8: Role.WEREWOLF, 9: Role.WEREWOLF}


def verdict(n: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"criterion {n}: {detail}"


# ----------------------------------------------------------- shared runs

@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """2,000 scripted training games plus 500 held-out games."""
    root = tmp_path_factory.mktemp("corpus")
    train = root / "train"
    held = root / "held"
    t0 = time.monotonic()
    gen_scripted_dataset(2000, seed=20240101, out_dir=train)
    gen_scripted_dataset(500, seed=20249999, out_dir=held)
    print(f"\n[corpus] 2500 scripted games in {time.monotonic() - t0:.0f}s")
    return {"train": train, "held": held}


@pytest.fixture(scope="session")
def bc_gate(corpus):
    """Behavioral cloning on the 2,000-game corpus (criterion 7)."""
    cfg = TrainerConfig(
        population_size=1, batch_size=256, bc_batch_size=768,
        episodes_per_iter=16, good_steps_per_iter=2, wolf_good_ratio=2,
        bc_episode_prob=1.0, alpha_start=1.0, alpha_end=1.0, alpha_decay_steps=0,
        lr=1e-3, beta=0.1, checkpoint_every=100, seed=11,
    )
    trainer = Trainer(cfg, bc_source=corpus["train"])
    t0 = time.monotonic()
    trainer.train(max_iterations=65)
    print(f"\n[bc gate] {trainer.total_episodes} episodes, "
          f"{trainer.total_samples} samples, steps {dict(trainer.steps)}, "
          f"{time.monotonic() - t0:.0f}s")
    return trainer


@pytest.fixture(scope="session")
def desk_gate(corpus):
    """Population-2 goods training vs frozen random wolves (criterion 6)."""
    cfg = TrainerConfig(
        population_size=2, batch_size=1024, bc_batch_size=512,
        episodes_per_iter=16, good_steps_per_iter=2, wolf_good_ratio=5,
        bc_episode_prob=0.35, alpha_start=0.5, alpha_end=0.01,
        alpha_decay_steps=250, lr=5e-4, beta=0.1, checkpoint_every=25,
        seed=17, wolf_policy="random", train_wolves=False, temperature=1.0,
    )
    trainer = Trainer(cfg, bc_source=corpus["train"])
    t0 = time.monotonic()
    trainer.train(target_samples=200_000, wall_clock_limit=45 * 60)
    print(f"\n[desk gate] {trainer.total_episodes} episodes, "
          f"{trainer.total_samples} samples, steps {dict(trainer.steps)}, "
          f"{time.monotonic() - t0:.0f}s")
    return trainer


# ------------------------------------------------------------- criteria

def test_criterion_1_rule_conformance():
    t0 = time.monotonic()
    game = build_paper_game()
    elapsed = time.monotonic() - t0
    ann = [(ev.day, tuple(ev.data["seats"])) for ev in game.state.event_log
           if ev.kind == E.EV_DEATH_ANNOUNCE]
    votes = {}
    for ev in game.state.event_log:
        if ev.kind == E.EV_VOTE:
            votes.setdefault((ev.day, ev.data["round"]), {})[ev.data["voter"]] = ev.data["target"]
    exiles = [(ev.day, ev.data["seat"]) for ev in game.state.event_log
              if ev.kind == E.EV_EXILE]
    ok = (ann == [(1, ()), (2, (1, 2)), (3, (5,))]
          and votes[(1, 1)] == {1: 1, 2: 1, 3: 1, 4: None, 5: 4, 6: 4, 7: 4, 8: 4, 9: 4}
          and votes[(2, 1)] == {3: 7, 5: 7, 6: 7, 7: 6, 8: 6, 9: 7}
          and votes[(3, 1)] == {3: None, 6: 6, 8: None, 9: 6}
          and exiles == [(1, 4), (2, 7), (3, 6)]
          and game.winner == Winner.WEREWOLVES
          and sorted(game.state.living()) == [3, 8, 9]
          and elapsed < 1.0)
    # and the produced log replays event-for-event
    buf = io.StringIO()
    E.write_log(game, buf)
    buf.seek(0)
    E.verify_replay(E.read_log(buf))
    verdict(1, ok, f"reference log reproduced event-for-event in {elapsed * 1000:.0f} ms")


def test_criterion_2_roundtrip_10k():
    rng = random.Random(424242)
    t0 = time.monotonic()
    failures = 0
    for _ in range(10_000):
        inst = P.random_instruction(rng)
        back = P.parse(P.render(inst), inst.speaker)
        if not np.array_equal(back.cells, inst.cells):
            failures += 1
    elapsed = time.monotonic() - t0
    verdict(2, failures == 0 and elapsed < 10.0,
            f"10,000 render/parse round trips, {failures} failures, {elapsed:.1f}s")


def test_criterion_3_gradient_oracle():
    rng = np.random.default_rng(99)
    worst = 0.0
    n_nets = 0

    def kink_margin(net, x):
        # smallest |preactivation| of any rectified unit: finite differences
        # are only trustworthy when no unit sits at the kink
        h = x
        margin = np.inf
        for i in range(len(net.W) - 1):
            z = h @ net.W[i] + net.b[i]
            margin = min(margin, float(np.abs(z).min()))
            h = np.maximum(z, 0.0)
        return margin

    for trial in range(20):
        sizes = [int(rng.integers(3, 9)), int(rng.integers(3, 9)),
                 int(rng.integers(1, 5))]
        if rng.random() < 0.5:
            sizes.insert(1, int(rng.integers(3, 7)))
        net = Mlp(f"g{trial}", sizes, rng)
        assert net.n_params() <= 1000
        n_nets += 1
        while True:
            x = rng.normal(size=(5, sizes[0]))
            if kink_margin(net, x) > 1e-3:
                break
        mixer = rng.normal(size=(5, sizes[-1]))

        def loss():
            y, _ = net.forward(x)
            return float((mixer * y).sum() + 0.5 * (y ** 2).sum())

        net.zero_grads()
        y, cache = net.forward(x)
        net.backward(cache, mixer + y)
        h = 1e-5
        for _, w, gw in net.params():
            flat_w = w.reshape(-1)
            flat_g = gw.reshape(-1)
            for i in range(flat_w.size):
                orig = flat_w[i]
                flat_w[i] = orig + h
                lp = loss()
                flat_w[i] = orig - h
                lm = loss()
                flat_w[i] = orig
                fd = (lp - lm) / (2 * h)
                if abs(fd) > 1e-10 or abs(flat_g[i]) > 1e-10:
                    worst = max(worst, abs(fd - flat_g[i])
                                / max(abs(fd), abs(flat_g[i]), 1e-8))
    verdict(3, n_nets >= 20 and worst < 1e-4,
            f"{n_nets} networks, max relative error {worst:.2e}")


def test_criterion_4_gae_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    for trial in range(1000):
        L = int(rng.integers(1, 65))
        rewards = rng.normal(size=L) * 4
        values = rng.normal(size=L)
        lam = (0.0, 0.9, 1.0)[trial % 3]
        gamma = (1.0, 0.98)[trial % 2]
        adv, _ = compute_gae(rewards, values, gamma, lam)
        deltas = [rewards[t] + gamma * (values[t + 1] if t + 1 < L else 0.0) - values[t]
                  for t in range(L)]
        expect = np.array([sum((gamma * lam) ** l * deltas[t + l]
                               for l in range(L - t)) for t in range(L)])
        worst = max(worst, float(np.abs(adv - expect).max()))
    verdict(4, worst < 1e-9,
            f"1,000 trajectories, max deviation from recursion {worst:.2e}")


def _score_log(events) -> dict[int, float]:
    return behavior_score(ReplayLog(seed=0, roles=ROLES, events=events)).totals()


def test_criterion_5_behavior_score_fixtures():
    ev = lambda kind, day, **data: GameEvent(kind, day, data)
    night = lambda day: ev(E.EV_NIGHT_KILL_VOTE, day, wolf=7, round=1, target=4)
    check = lambda day, t: ev(E.EV_SEER_CHECK, day, target=t, is_werewolf=ROLES[t] == Role.WEREWOLF)
    cases = [
        # 1. poison a werewolf: witch +1.0
        ([night(1), check(1, 4), ev(E.EV_WITCH_ACT, 1, choice="poison", target=8)],
         {2: 1.0}),
        # 2. poison a good player: witch -1.0
        ([night(1), check(1, 4), ev(E.EV_WITCH_ACT, 1, choice="poison", target=5)],
         {2: -1.0}),
        # 3. shoot a werewolf: hunter +1.0
        ([night(1), check(1, 4), ev(E.EV_HUNTER_SHOT, 1, shooter=3, target=9)],
         {3: 1.0}),
        # 4. shoot a good player: hunter -1.0
        ([night(1), check(1, 4), ev(E.EV_HUNTER_SHOT, 1, shooter=3, target=4)],
         {3: -1.0}),
        # 5. a werewolf exiled on day one: seer +0.5
        ([night(1), check(1, 4), ev(E.EV_EXILE, 1, seat=7, round=1)],
         {1: 0.5}),
        # 6. two skipped inspections: seer -1.0
        ([night(1), night(2)], {1: -1.0}),
        # 7. villager votes wolf then good: net 0.0
        ([night(1), check(1, 4),
          ev(E.EV_VOTE, 1, voter=4, target=7, round=1),
          ev(E.EV_VOTE, 2, voter=4, target=5, round=1)],
         {4: 0.0}),
        # 8. witch and hunter votes score like other good roles
        ([night(1), check(1, 4),
          ev(E.EV_VOTE, 1, voter=2, target=8, round=1),
          ev(E.EV_VOTE, 1, voter=3, target=5, round=1)],
         {2: 0.5, 3: -0.5}),
        # 9. werewolves are never scored
        ([night(1), check(1, 4),
          ev(E.EV_VOTE, 1, voter=7, target=8, round=1),
          ev(E.EV_VOTE, 1, voter=8, target=1, round=1),
          ev(E.EV_SUICIDE, 1, seat=9)],
         {7: 0.0, 8: 0.0, 9: 0.0}),
        # 10. zero votes, zero skills: everyone 0
        ([night(1), check(1, 4)], {s: 0.0 for s in E.SEATS}),
    ]
    bad = []
    for i, (events, expect) in enumerate(cases, start=1):
        totals = _score_log(events)
        for seat, want in expect.items():
            if totals[seat] != want:
                bad.append((i, seat, want, totals[seat]))
    verdict(5, not bad, f"10 hand-built logs reproduce the score table exactly {bad}")


def test_criterion_6_desk_scale_training_gate(desk_gate, corpus):
    assert desk_gate.total_samples >= 200_000
    goods = AgentSpec(kind="thinker",
                      checkpoint=desk_gate.params[(0, GOOD)], temperature=0.25)
    rand = AgentSpec(kind="random")
    t0 = time.monotonic()
    baseline = play_faction_match(rand, rand, 1000, seed=606060)
    trained = play_faction_match(goods, rand, 1000, seed=616161)
    print(f"\n[criterion 6] eval in {time.monotonic() - t0:.0f}s: "
          f"all-random goods {baseline.goods_win_rate:.3f}, "
          f"trained goods {trained.goods_win_rate:.3f}")
    # (a) win-rate gate: over the 55% bar and above the random floor
    ok_a = (trained.goods_win_rate >= 0.55
            and trained.goods_win_rate > baseline.goods_win_rate)
    # training trend: wolves lose more as the goods models learn
    wolf_wr = [m["win_rate_wolf"] for m in desk_gate.metrics if m["faction"] == GOOD]
    q = max(len(wolf_wr) // 4, 1)
    trend_ok = np.mean(wolf_wr[-q:]) <= np.mean(wolf_wr[:q]) + 0.02
    # (b) deduction gate on held-out scripted games
    held = sorted(Path(corpus["held"]).glob("*.jsonl"))
    table = deduction_eval(desk_gate.params[(0, GOOD)], held)
    acc = table["vote_accuracy"]
    ok_b = acc >= 3 / 8 + 0.10
    print(f"[criterion 6] villager first-vote accuracy {acc:.3f} over {table['n']} "
          f"points (baseline 0.375); id_seer={table.get('id_seer', 0):.2f} "
          f"id_witch={table.get('id_witch', 0):.2f} id_hunter={table.get('id_hunter', 0):.2f}")
    verdict(6, ok_a and ok_b and trend_ok,
            f"trained {trained.goods_win_rate:.3f} vs floor {baseline.goods_win_rate:.3f} "
            f"(>=0.55), vote accuracy {acc:.3f} >= 0.475, trend ok={trend_ok}")


def test_criterion_7_bc_gate(bc_gate, desk_gate, corpus):
    held = sorted(Path(corpus["held"]).glob("*.jsonl"))
    hits = [0, 0]
    per_kind: dict[str, list[int]] = {}
    for path in held:
        if hits[1] >= 3000:
            break
        with open(path) as fp:
            log = E.read_log(fp)
        tape = SpeechTape()

        def on_decision(game, dec, act):
            if hits[1] >= 3000:
                return
            fac = WOLF if log.roles[dec.seat] == Role.WEREWOLF else GOOD
            out = T.forward(bc_gate.params[(0, fac)],
                            E.observe(game, dec.seat), dec, tape)
            guess = int(np.argmax(out.action_logits))
            want = action_index(dec.kind, act)
            k = per_kind.setdefault(dec.kind.value, [0, 0])
            k[0] += guess == want
            k[1] += 1
            hits[0] += guess == want
            hits[1] += 1

        E.drive_from_log(log, on_decision=on_decision)
    match = hits[0] / max(hits[1], 1)
    print(f"\n[criterion 7] held-out action match {hits[0]}/{hits[1]} = {match:.3f}")
    for k, (h, n) in sorted(per_kind.items()):
        print(f"    {k:20s} {h / max(n, 1):.3f} ({n})")
    # the combined objective's BC coefficient floor shows up in the metrics
    # of the mixed desk run, whose schedule decayed to its configured floor
    alphas = [m["alpha"] for m in desk_gate.metrics]
    floor_ok = min(alphas) == 0.01 and alphas[-1] == 0.01 and 0.01 not in (alphas[0],)
    verdict(7, match >= 0.90 and floor_ok,
            f"held-out match {match:.3f} >= 0.90; alpha floor 0.01 visible in "
            f"metrics (first {alphas[0]:.3f}, last {alphas[-1]:.3f})")


def test_criterion_8_filter_suite():
    rng = random.Random(88)
    cases = []  # (instruction, produced_text, expect_accept)

    def rt(seed):
        inst = P.random_instruction(random.Random(seed))
        return inst, P.render(inst), True

    for seed in range(10):  # 10 exact matches
        cases.append(rt(seed))
    for seed in range(10, 15):  # 5 leeway: extra claims about other players
        inst = P.random_instruction(random.Random(seed), speaker=3)
        extra = " Player 5 might be a werewolf." if inst.get(5, P.Attribute.WEREWOLF) == P.Modality.UNMENTIONED else " Player 6 is gold water."
        cases.append((inst, P.render(inst) + extra, True))
    for seed in range(15, 20):  # 5 self-row violations
        inst = P.FeatureMatrix(2).set(2, P.Attribute.VILLAGER, P.Modality.IS)
        texts = ["I am the Seer.",
                 "I am a villager. I am the Witch.",
                 "I am the Hunter. Player 4 is a werewolf.",
                 "I am a good person.",
                 "I have nothing to add."]
        cases.append((inst, texts[seed - 15], False))
    for seed in range(20, 25):  # 5 inconsistent instructed cells about others
        inst = P.FeatureMatrix(1).set(1, P.Attribute.SEER, P.Modality.IS)
        inst.set(4, P.Attribute.WEREWOLF, P.Modality.IS)
        texts = ["I am the Seer. Player 4 is not a werewolf.",
                 "I am the Seer. Player 4 might be a werewolf.",
                 "I am the Seer. Player 4 is a good person.",  # missing instructed cell
                 "I am the Seer.",                             # missing instructed cell
                 "I am the Seer. I am not sure whether Player 4 is a werewolf."]
        cases.append((inst, texts[seed - 20], False))
    # 3 missing/extra combinations
    inst = P.FeatureMatrix(5).set(5, P.Attribute.GOOD, P.Modality.IS)
    inst.set(2, P.Attribute.VOTE, P.Modality.IS)
    cases.append((inst, "I am a good person. I will vote for Player 2. Player 7 abstained from voting.", True))
    cases.append((inst, "I am a good person.", False))                  # vote intent dropped
    cases.append((inst, "I will vote for Player 2.", False))            # self claim dropped
    # 2 empty instructions
    cases.append((P.FeatureMatrix(4), P.FILLER_TEXT, True))
    cases.append((P.FeatureMatrix(4), "I am the Seer.", False))         # unrequested self claim

    assert len(cases) == 30
    wrong = []
    for i, (inst, text, expect) in enumerate(cases):
        produced = P.parse(text, inst.speaker)
        got = P.filter_check(inst, produced).accepted
        if got != expect:
            wrong.append((i, expect, got))
    verdict(8, not wrong, f"30 filter cases, mismatches: {wrong}")


def test_criterion_9_service_integrity():
    from fastapi.testclient import TestClient
    # one full 9-AI session over HTTP replays through the bare engine
    client = TestClient(create_app())
    sid = client.post("/sessions", json={"seats": [{"kind": "scripted"}] * 9,
                                         "seed": 999}).json()["session_id"]
    res = client.get(f"/sessions/{sid}/result").json()
    log = E.read_log(io.StringIO("\n".join(res["log"])))
    E.verify_replay(log)
    # 100 seeded sessions: per-seat streams carry exactly what observe() allows
    leaks = 0
    for seed in range(100):
        bindings = {s: SeatBinding(kind="scripted") for s in E.SEATS}
        sess = Session(f"t{seed}", seed * 13 + 1, bindings)
        assert sess.game.over
        roles = {s: sess.game.state.seats[s].role for s in E.SEATS}
        for seat in E.SEATS:
            expect = [ev.to_wire() for ev in sess.game.state.event_log
                      if event_visible_to(ev, seat, roles)]
            if sess.streams[seat] != expect:
                leaks += 1
            obs = E.observe(sess.game, seat)
            got_checks = [e for e in sess.streams[seat] if e["kind"] == "seer_check"]
            if bool(got_checks) != bool(obs.seer_checks):
                leaks += 1
            if roles[seat] != Role.WEREWOLF and any(
                    e["kind"] == "night_kill_vote" for e in sess.streams[seat]):
                leaks += 1
    verdict(9, leaks == 0,
            "HTTP session replayed exactly; 100 seeded games, 0 stream leaks")
