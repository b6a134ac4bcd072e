"""Training orchestration: actors fill the buffer, learners step each member.

Single-process rendition of the actor/learner loop: every iteration plays a
batch of episodes (BC or RL), then steps each population member's wolf model
`wolf_good_ratio` times per good-model step.  Checkpoints go to the pool for
fictitious self-play; metrics stream out as dict records.
"""
from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import engine as E
from ..engine import ReplayMismatch, Winner
from ..policy.nets import Adam
from ..policy.thinker import ThinkerConfig, ThinkerParams
from .episodes import EpisodeResult, run_bc_episode, run_rl_episode
from .losses import bc_loss, ppo_loss
from .rewards import RewardConfig
from .samples import GOOD, WOLF, CheckpointPool, ReplayBuffer
from .scripted import dataset_paths


@dataclass
class TrainerConfig:
    population_size: int = 4
    lr: float = 2e-4
    batch_size: int = 2048
    gamma: float = 1.0
    lam: float = 0.9
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.05
    alpha_start: float = 0.1
    alpha_end: float = 0.01
    alpha_decay_steps: int = 500
    beta: float = 0.1
    wolf_good_ratio: int = 5
    latest_seats_mean: float = 3.0
    buffer_capacity: int = 100_000
    checkpoint_capacity: int = 500
    checkpoint_every: int = 10
    episodes_per_iter: int = 16
    good_steps_per_iter: int = 1
    bc_episode_prob: float = 0.25
    bc_batch_size: int = 512
    temperature: float = 1.0
    max_grad_norm: float = 1.0
    wolf_policy: str = "thinker"     # thinker | random | scripted
    good_policy: str = "thinker"
    train_wolves: bool = True
    train_goods: bool = True
    cognition: bool = True
    seed: int = 0
    net: ThinkerConfig = field(default_factory=ThinkerConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)

    def alpha(self, step: int) -> float:
        """BC coefficient schedule; decays linearly but never below the floor."""
        if self.alpha_decay_steps <= 0:
            return self.alpha_end
        frac = min(step / self.alpha_decay_steps, 1.0)
        return max(self.alpha_end,
                   self.alpha_start - (self.alpha_start - self.alpha_end) * frac)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    @staticmethod
    def from_dict(d: dict) -> "TrainerConfig":
        d = dict(d)
        net = d.pop("net", None)
        rewards = d.pop("rewards", None)
        cfg = TrainerConfig(**d)
        if net:
            cfg.net = ThinkerConfig.from_dict(net)
        if rewards:
            cfg.rewards = RewardConfig.from_dict(rewards)
        return cfg


def load_config(path) -> TrainerConfig:
    with open(path) as fp:
        return TrainerConfig.from_dict(json.load(fp))


def save_config(cfg: TrainerConfig, path) -> None:
    with open(path, "w") as fp:
        json.dump(cfg.to_dict(), fp, indent=1)


class Trainer:
    def __init__(self, cfg: TrainerConfig, bc_source=None,
                 metrics_path: Optional[Path] = None):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.buffer = ReplayBuffer(cfg.buffer_capacity)
        self.pool = CheckpointPool(cfg.checkpoint_capacity)
        self.params: dict[tuple[int, str], ThinkerParams] = {}
        self.opts: dict[tuple[int, str], Adam] = {}
        self.steps: dict[tuple[int, str], int] = {}
        for m in range(cfg.population_size):
            for fac in (WOLF, GOOD):
                net_cfg = ThinkerConfig.from_dict(cfg.net.to_dict())
                net_cfg.seed = cfg.seed * 1000 + m * 10 + (0 if fac == WOLF else 1)
                p = ThinkerParams(net_cfg)
                self.params[(m, fac)] = p
                self.opts[(m, fac)] = Adam(lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
                self.steps[(m, fac)] = 0
                self.pool.publish(m, fac, p)
        self.bc_logs = dataset_paths(bc_source) if bc_source else []
        self.metrics: list[dict] = []
        self._metrics_fp = open(metrics_path, "w") if metrics_path else None
        self.total_samples = 0
        self.total_episodes = 0
        self.bad_logs = 0
        self.recent_winners: list[str] = []
        self.recent_wolf_speeches = [0, 0]  # (seer claims, speeches)
        self.recent_rewards: dict[str, float] = {}
        self._recent_reward_games = 0
        self._episode_seed = cfg.seed * 7919

    # ------------------------------------------------------------- actors

    def _next_member(self) -> int:
        return self.total_episodes % self.cfg.population_size

    def run_episode(self) -> Optional[EpisodeResult]:
        cfg = self.cfg
        member = self._next_member()
        self.total_episodes += 1
        self._episode_seed += 1
        use_bc = bool(self.bc_logs) and self.rng.random() < cfg.bc_episode_prob
        if use_bc:
            path = self.bc_logs[self.rng.randrange(len(self.bc_logs))]
            try:
                with open(path) as fp:
                    log = E.read_log(fp)
                result = run_bc_episode(log, member)
            except (ReplayMismatch, ValueError):
                self.bad_logs += 1
                return None
        else:
            result = run_rl_episode(
                self.pool, member, self._episode_seed,
                rewards=cfg.rewards,
                wolf_policy=cfg.wolf_policy, good_policy=cfg.good_policy,
                train_wolves=cfg.train_wolves, train_goods=cfg.train_goods,
                latest_prob=cfg.latest_seats_mean / 9.0,
                temperature=cfg.temperature, gamma=cfg.gamma, lam=cfg.lam,
                cognition=cfg.cognition and cfg.train_wolves
                and cfg.wolf_policy == "thinker")
            self.recent_winners.append(result.winner.value)
            if len(self.recent_winners) > 200:
                self.recent_winners.pop(0)
            self.recent_wolf_speeches[0] += result.stats.get("wolf_seer_claims", 0)
            self.recent_wolf_speeches[1] += result.stats.get("wolf_speeches", 0)
            for reason, total in result.stats.get("reward_components", {}).items():
                self.recent_rewards[reason] = self.recent_rewards.get(reason, 0.0) + total
            self._recent_reward_games += 1
        self.buffer.extend(result.samples)
        self.total_samples += len(result.samples)
        return result

    # ------------------------------------------------------------ learners

    def learner_step(self, member: int, faction: str) -> dict:
        cfg = self.cfg
        params = self.params[(member, faction)]
        rl_batch = self.buffer.sample_batch(cfg.batch_size, self.rng,
                                            member=member, faction=faction,
                                            is_bc=False)
        bc_batch = self.buffer.sample_batch(cfg.bc_batch_size, self.rng,
                                            member=member, faction=faction,
                                            is_bc=True)
        step = self.steps[(member, faction)]
        alpha = cfg.alpha(step)
        params.zero_grads()
        st_rl = ppo_loss(rl_batch, params, clip=cfg.clip,
                         value_coef=cfg.value_coef,
                         entropy_coef=cfg.entropy_coef, beta=cfg.beta)
        st_bc = bc_loss(bc_batch, params, beta=cfg.beta, weight=alpha)
        grad_norm = self.opts[(member, faction)].step(params.all_nets())
        self.steps[(member, faction)] = step + 1
        if (step + 1) % cfg.checkpoint_every == 0:
            self.pool.publish(member, faction, params)
        wolf_speech_freq = (self.recent_wolf_speeches[0]
                            / max(self.recent_wolf_speeches[1], 1))
        record = {
            "step": step + 1,
            "member": member,
            "faction": faction,
            "alpha": alpha,
            "loss_policy": st_rl.policy,
            "loss_value": st_rl.value,
            "entropy": st_rl.entropy,
            "loss_bc": st_bc.bc,
            "loss_id": st_rl.identity or st_bc.identity,
            "clip_frac": st_rl.clip_frac,
            "grad_norm": grad_norm,
            "n_rl": st_rl.n_rl,
            "n_bc": st_bc.n_bc,
            "dropped": st_rl.n_dropped + st_bc.n_dropped,
            "buffer": len(self.buffer),
            "total_samples": self.total_samples,
            "win_rate_wolf": (self.recent_winners.count("werewolves")
                              / max(len(self.recent_winners), 1)),
            "wolf_claims_seer": wolf_speech_freq,
            "reward_components": {
                k: v / max(self._recent_reward_games, 1)
                for k, v in sorted(self.recent_rewards.items())},
        }
        self.metrics.append(record)
        if self._metrics_fp:
            self._metrics_fp.write(json.dumps(record) + "\n")
            self._metrics_fp.flush()
        return record

    def iteration(self) -> None:
        cfg = self.cfg
        for _ in range(cfg.episodes_per_iter):
            self.run_episode()
        for m in range(cfg.population_size):
            if cfg.train_wolves and cfg.wolf_policy == "thinker":
                for _ in range(cfg.wolf_good_ratio * cfg.good_steps_per_iter):
                    self.learner_step(m, WOLF)
            if cfg.train_goods and cfg.good_policy == "thinker":
                for _ in range(cfg.good_steps_per_iter):
                    self.learner_step(m, GOOD)

    def train(self, *, target_samples: Optional[int] = None,
              max_iterations: Optional[int] = None,
              wall_clock_limit: Optional[float] = None,
              progress: Optional[Callable[[dict], None]] = None) -> CheckpointPool:
        t0 = time.monotonic()
        it = 0
        while True:
            it += 1
            self.iteration()
            if progress:
                progress({"iteration": it, "samples": self.total_samples,
                          "episodes": self.total_episodes,
                          "elapsed": time.monotonic() - t0})
            if target_samples is not None and self.total_samples >= target_samples:
                break
            if max_iterations is not None and it >= max_iterations:
                break
            if wall_clock_limit is not None and time.monotonic() - t0 > wall_clock_limit:
                break
        for m in range(self.cfg.population_size):
            for fac in (WOLF, GOOD):
                self.pool.publish(m, fac, self.params[(m, fac)])
        if self._metrics_fp:
            self._metrics_fp.close()
            self._metrics_fp = None
        return self.pool

    def save_checkpoints(self, out_dir) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for (m, fac), params in self.params.items():
            path = out_dir / f"member{m}_{fac}.npz"
            params.save(path, meta={"member": m, "faction": fac,
                                    "steps": self.steps[(m, fac)]})
            paths.append(path)
        return paths


def combined_step(rl_batch, bc_batch, params: ThinkerParams, cfg: TrainerConfig,
                  opt: Adam, alpha: float):
    """One update: alpha*BC + PPO + beta*identity, Adam with norm clipping."""
    params.zero_grads()
    st_rl = ppo_loss(rl_batch, params, clip=cfg.clip, value_coef=cfg.value_coef,
                     entropy_coef=cfg.entropy_coef, beta=cfg.beta)
    st_bc = bc_loss(bc_batch, params, beta=cfg.beta, weight=alpha)
    grad_norm = opt.step(params.all_nets())
    return st_rl, st_bc, grad_norm
