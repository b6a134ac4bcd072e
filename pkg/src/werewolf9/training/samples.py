"""Training sample records, the replay buffer, and the checkpoint pool."""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..engine import DecisionType
from ..policy.thinker import ObsSnapshot, ThinkerParams

WOLF = "werewolves"
GOOD = "goods"


@dataclass
class Sample:
    """One decision record: observation snapshot plus what happened there."""

    snap: ObsSnapshot
    seat: int
    dtype: DecisionType
    mask: Optional[np.ndarray] = None           # (n_options,) bool
    action: Optional[int] = None                # chosen option index
    instr_cells: Optional[np.ndarray] = None    # (9,18) uint8
    behavior_logp: Optional[object] = None      # float or (9,18) array
    reward_to_go: float = 0.0
    advantage: float = 0.0
    value_target: float = 0.0
    identity_label: Optional[np.ndarray] = None  # (9,) role indices
    is_bc: bool = False
    member: int = 0
    faction: str = GOOD

    def __post_init__(self):
        if not self.is_bc and not np.isfinite(self.advantage):
            raise ValueError("advantages must be finite")


class ReplayBuffer:
    """Bounded FIFO; uniform draws over the samples matching a tag filter."""

    def __init__(self, capacity: int = 100_000):
        self.capacity = capacity
        self._items: deque[Sample] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def add(self, sample: Sample) -> None:
        self._items.append(sample)

    def extend(self, samples) -> None:
        for s in samples:
            self._items.append(s)

    def sample_batch(self, n: int, rng: random.Random,
                     member: Optional[int] = None,
                     faction: Optional[str] = None,
                     is_bc: Optional[bool] = None) -> list[Sample]:
        pool = [s for s in self._items
                if (member is None or s.member == member)
                and (faction is None or s.faction == faction)
                and (is_bc is None or s.is_bc == is_bc)]
        if not pool:
            return []
        if len(pool) <= n:
            return list(pool)
        return [pool[rng.randrange(len(pool))] for _ in range(n)]

    def counts(self) -> dict:
        by = {}
        for s in self._items:
            key = (s.member, s.faction, s.is_bc)
            by[key] = by.get(key, 0) + 1
        return by


class CheckpointPool:
    """Ring of the most recent checkpoints per (member, faction), plus latest."""

    def __init__(self, capacity: int = 500):
        self.capacity = capacity
        self._rings: dict[tuple[int, str], deque] = {}
        self._latest: dict[tuple[int, str], ThinkerParams] = {}
        self._counter = 0

    def publish(self, member: int, faction: str, params: ThinkerParams) -> int:
        """Snapshot the parameters as the newest checkpoint; returns its id."""
        snap = params.copy()
        self._counter += 1
        ring = self._rings.setdefault((member, faction), deque(maxlen=self.capacity))
        ring.append((self._counter, snap))
        self._latest[(member, faction)] = snap
        return self._counter

    def latest(self, member: int, faction: str) -> ThinkerParams:
        return self._latest[(member, faction)]

    def sample(self, member: int, faction: str, rng: random.Random) -> ThinkerParams:
        ring = self._rings.get((member, faction))
        if not ring:
            raise KeyError(f"no checkpoints for member={member} faction={faction}")
        return ring[rng.randrange(len(ring))][1]

    def ids(self, member: int, faction: str) -> list[int]:
        return [cid for cid, _ in self._rings.get((member, faction), ())]

    def size(self, member: int, faction: str) -> int:
        return len(self._rings.get((member, faction), ()))
