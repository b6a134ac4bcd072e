"""Generalized advantage estimation over one seat's decision sequence."""
from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, gamma: float, lam: float):
    """Returns (advantages, value_targets); the terminal bootstrap is zero.

    `rewards[t]` is everything accrued after decision t up to decision t+1
    (or the end of the game), `values[t]` the critic estimate at decision t.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape or rewards.ndim != 1:
        raise ValueError("rewards and values must be 1-D arrays of equal length")
    T = len(rewards)
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        v_next = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + gamma * v_next - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv, adv + values
