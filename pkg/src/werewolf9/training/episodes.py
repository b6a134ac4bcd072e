"""Self-play and cloning episode generation for the actor side."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import engine as E
from ..engine import Action, DecisionType, Role, Winner
from ..protocol import Attribute, FeatureMatrix, Modality
from ..policy import thinker as T
from ..policy.features import ROLE_INDEX, SpeechTape, legal_mask, index_to_action
from ..policy.thinker import ObsSnapshot, ThinkerParams
from .gae import compute_gae
from .rewards import RewardConfig, shape_rewards
from .samples import GOOD, WOLF, CheckpointPool, Sample
from .scripted import ScriptedAgent

WOLF_COL = ROLE_INDEX[Role.WEREWOLF]


@dataclass
class EpisodeResult:
    samples: list[Sample]
    winner: Winner
    roles: dict[int, Role]
    events: list[E.GameEvent]
    stats: dict = field(default_factory=dict)


def faction_of(role: Role) -> str:
    return WOLF if role == Role.WEREWOLF else GOOD


def identity_probs_for(params: ThinkerParams, obs, tape) -> np.ndarray:
    snap = ObsSnapshot.capture(obs, tape, None)
    cache = T.trunk_forward(params, T.BatchInputs([snap]))
    logits, _ = T.identity_forward(params, cache.player_emb, cache.g)
    from ..policy.nets import softmax
    return softmax(logits[0], axis=-1)


def _empty_speech(seat: int, header) -> FeatureMatrix:
    return FeatureMatrix(seat, header)


def run_rl_episode(pool: CheckpointPool, member: int, seed: int, *,
                   rewards: Optional[RewardConfig] = None,
                   wolf_policy: str = "thinker", good_policy: str = "thinker",
                   train_wolves: bool = True, train_goods: bool = True,
                   latest_prob: float = 1 / 3, temperature: float = 1.0,
                   gamma: float = 1.0, lam: float = 0.9,
                   cognition: bool = True) -> EpisodeResult:
    """One self-play game; samples come from seats running the latest model.

    Seat models follow fictitious self-play: each seat independently runs the
    latest checkpoint with probability `latest_prob` (an average of
    9*latest_prob seats), otherwise one sampled from the pool.  A faction set
    to "random" or "scripted" is frozen and yields no samples.
    """
    rng = random.Random(seed)
    nprng = np.random.default_rng(seed ^ 0x5EED)
    game = E.new_game(seed)
    roles = {s: game.state.seats[s].role for s in E.SEATS}
    tape = SpeechTape()

    seat_params: dict[int, Optional[ThinkerParams]] = {}
    seat_agent: dict[int, Optional[ScriptedAgent]] = {}
    collect: dict[int, bool] = {}
    for seat in E.SEATS:
        fac = faction_of(roles[seat])
        policy = wolf_policy if fac == WOLF else good_policy
        trainable = train_wolves if fac == WOLF else train_goods
        if policy == "thinker":
            use_latest = rng.random() < latest_prob or pool.size(member, fac) <= 1
            params = (pool.latest(member, fac) if use_latest
                      else pool.sample(member, fac, rng))
            seat_params[seat] = params
            seat_agent[seat] = None
            collect[seat] = trainable and params is pool.latest(member, fac)
        else:
            seat_params[seat] = None
            seat_agent[seat] = ScriptedAgent(seat) if policy == "scripted" else None
            collect[seat] = False

    samples_by_seat: dict[int, list[Sample]] = {s: [] for s in E.SEATS}
    ev_start: dict[int, list[int]] = {s: [] for s in E.SEATS}
    values_by_seat: dict[int, list[float]] = {s: [] for s in E.SEATS}
    traces: dict[int, dict[int, tuple[float, float]]] = {}
    wolf_speeches = 0
    wolf_seer_claims = 0
    label = np.array([ROLE_INDEX[roles[s]] for s in E.SEATS], dtype=np.int64)

    def good_identity_view(speaker: int) -> dict[int, float]:
        """Each living thinker good seat's P(speaker is a wolf)."""
        views = {}
        for g_seat in E.SEATS:
            if (g_seat == speaker or not game.state.seats[g_seat].alive
                    or roles[g_seat] == Role.WEREWOLF or seat_params[g_seat] is None):
                continue
            probs = identity_probs_for(seat_params[g_seat], E.observe(game, g_seat), tape)
            views[g_seat] = float(probs[speaker - 1, WOLF_COL])
        return views

    while not game.over:
        for dec in list(game.pending()):
            seat = dec.seat
            obs = E.observe(game, seat)
            params = seat_params[seat]
            if params is None:
                agent = seat_agent[seat]
                if dec.kind == DecisionType.SPEECH:
                    inst = (agent.speak(obs, dec) if agent
                            else _empty_speech(seat, dec.header))
                    game.submit_speech(seat, inst)
                else:
                    act = agent.decide(obs, dec) if agent else rng.choice(dec.options)
                    game.submit(seat, act)
                continue
            out = T.forward(params, obs, dec, tape)
            pre_views = None
            is_wolf_speech = (dec.kind == DecisionType.SPEECH
                              and roles[seat] == Role.WEREWOLF)
            if is_wolf_speech and cognition and collect[seat]:
                pre_views = good_identity_view(seat)
            if dec.kind == DecisionType.SPEECH:
                cells, logp = T.sample_instruction(out, temperature, nprng)
                inst = FeatureMatrix(seat, dec.header, cells)
                if collect[seat]:
                    snap = ObsSnapshot.capture(obs, tape, dec)
                    ev_start[seat].append(len(game.state.event_log))
                    values_by_seat[seat].append(out.value)
                    samples_by_seat[seat].append(Sample(
                        snap=snap, seat=seat, dtype=dec.kind,
                        instr_cells=cells, behavior_logp=logp,
                        identity_label=label, is_bc=False, member=member,
                        faction=faction_of(roles[seat])))
                    if roles[seat] == Role.WEREWOLF:
                        wolf_speeches += 1
                        if inst.get(seat, Attribute.SEER) == Modality.IS:
                            wolf_seer_claims += 1
                speech_ev_idx = len(game.state.event_log)
                game.submit_speech(seat, inst)
                if pre_views is not None:
                    post_views = good_identity_view(seat)
                    traces[speech_ev_idx] = {
                        g: (pre_views[g], post_views[g])
                        for g in pre_views if g in post_views}
            else:
                idx, logp = T.sample_action(out, temperature, nprng)
                if collect[seat]:
                    snap = ObsSnapshot.capture(obs, tape, dec)
                    ev_start[seat].append(len(game.state.event_log))
                    values_by_seat[seat].append(out.value)
                    samples_by_seat[seat].append(Sample(
                        snap=snap, seat=seat, dtype=dec.kind,
                        mask=out.mask.copy(), action=idx, behavior_logp=logp,
                        identity_label=label, is_bc=False, member=member,
                        faction=faction_of(roles[seat])))
                game.submit(seat, index_to_action(dec, idx))

    events = game.state.event_log
    reward_events = shape_rewards(roles, events, rewards, traces or None)
    reward_components: dict[str, float] = {}
    for seat in E.SEATS:
        for rev in reward_events[seat]:
            reward_components[rev.reason] = (
                reward_components.get(rev.reason, 0.0) + rev.amount)
    all_samples: list[Sample] = []
    for seat in E.SEATS:
        seq = samples_by_seat[seat]
        if not seq:
            continue
        starts = ev_start[seat]
        step_rewards = np.zeros(len(seq))
        for rev in reward_events[seat]:
            for t in range(len(seq) - 1, -1, -1):
                if rev.event_index >= starts[t]:
                    step_rewards[t] += rev.amount
                    break
        adv, targets = compute_gae(step_rewards, np.array(values_by_seat[seat]),
                                   gamma, lam)
        rtg = np.cumsum(step_rewards[::-1])[::-1]
        for t, s in enumerate(seq):
            s.advantage = float(adv[t])
            s.value_target = float(targets[t])
            s.reward_to_go = float(rtg[t])
        all_samples.extend(seq)

    stats = {
        "winner": game.winner.value,
        "days": game.state.day,
        "wolf_speeches": wolf_speeches,
        "wolf_seer_claims": wolf_seer_claims,
        "n_samples": len(all_samples),
        "reward_components": reward_components,
    }
    return EpisodeResult(samples=all_samples, winner=game.winner, roles=roles,
                         events=events, stats=stats)


def run_bc_episode(log: E.ReplayLog, member: int) -> EpisodeResult:
    """Samples straight from a replay log, bypassing policy inference."""
    tape = SpeechTape()
    roles = log.roles
    label = np.array([ROLE_INDEX[roles[s]] for s in E.SEATS], dtype=np.int64)
    samples: list[Sample] = []

    def on_decision(game: E.Game, dec, act: Action):
        obs = E.observe(game, dec.seat)
        snap = ObsSnapshot.capture(obs, tape, dec)
        mask = legal_mask(dec)
        from ..policy.features import action_index
        samples.append(Sample(
            snap=snap, seat=dec.seat, dtype=dec.kind, mask=mask,
            action=action_index(dec.kind, act), identity_label=label,
            is_bc=True, member=member, faction=faction_of(roles[dec.seat])))

    def on_speech(game: E.Game, dec, inst: FeatureMatrix):
        obs = E.observe(game, dec.seat)
        snap = ObsSnapshot.capture(obs, tape, dec)
        samples.append(Sample(
            snap=snap, seat=dec.seat, dtype=dec.kind,
            instr_cells=inst.cells.copy(), identity_label=label,
            is_bc=True, member=member, faction=faction_of(roles[dec.seat])))

    game = E.drive_from_log(log, on_decision=on_decision, on_speech=on_speech)
    stats = {"winner": game.winner.value, "n_samples": len(samples)}
    return EpisodeResult(samples=samples, winner=game.winner, roles=roles,
                         events=game.state.event_log, stats=stats)
