"""Learner losses: clipped policy surrogate, cloning NLL, identity auxiliary.

Each loss routine runs its own trunk pass, accumulates gradients on the
parameter nets (scaled by its weight), and returns scalars for logging.
An instruction decision contributes one unit per matrix cell; all of a
speech's cells share the speech's advantage.  With apply_grads=False the
routines are pure loss evaluations (nothing is accumulated).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import DecisionType
from ..policy import thinker as T
from ..policy.nets import masked_log_softmax
from ..policy.thinker import BatchInputs, ThinkerParams
from .samples import Sample

INSTR_CELLS = 9 * 18


@dataclass
class LossStats:
    policy: float = 0.0
    value: float = 0.0
    entropy: float = 0.0
    bc: float = 0.0
    identity: float = 0.0
    n_rl: int = 0
    n_bc: int = 0
    n_dropped: int = 0
    clip_frac: float = 0.0


def _group_by_dtype(samples: list[Sample]) -> dict[DecisionType, list[int]]:
    groups: dict[DecisionType, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.dtype, []).append(i)
    return groups


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def _identity_loss(params: ThinkerParams, samples, idx_all, cache, beta: float,
                   apply_grads: bool, d_pe, d_g) -> float:
    labeled = [i for i in idx_all if samples[i].identity_label is not None]
    if not labeled:
        return 0.0
    pe = cache.player_emb[labeled]
    g = cache.g[labeled]
    logits, id_cache = T.identity_forward(params, pe, g)
    logp = _log_softmax(logits)
    labels = np.stack([samples[i].identity_label for i in labeled])  # (b,9)
    onehot = np.eye(5)[labels]
    n_units = labels.size
    loss = float(-(onehot * logp).sum() / n_units)
    if apply_grads and beta != 0.0:
        dlogits = beta * (np.exp(logp) - onehot) / n_units
        dpe_i, dg_i = T.identity_backward(params, id_cache, dlogits,
                                          params.cfg.player_out, params.cfg.global_out)
        d_pe[labeled] += dpe_i
        d_g[labeled] += dg_i
    return loss


def ppo_loss(samples: list[Sample], params: ThinkerParams, *,
             clip: float = 0.2, value_coef: float = 0.5,
             entropy_coef: float = 0.05, beta: float = 0.0,
             normalize_adv: bool = True, weight: float = 1.0,
             apply_grads: bool = True) -> LossStats:
    """Clipped surrogate + value + entropy (+ identity) on non-BC samples.

    Samples whose importance ratio is non-finite are dropped and counted.
    """
    stats = LossStats()
    rl = [s for s in samples if not s.is_bc]
    if not rl:
        return stats
    stats.n_rl = len(rl)
    binp = BatchInputs([s.snap for s in rl])
    cache = T.trunk_forward(params, binp)
    P, G = params.cfg.player_out, params.cfg.global_out
    d_pe = np.zeros_like(cache.player_emb)
    d_g = np.zeros_like(cache.g)

    adv = np.array([s.advantage for s in rl])
    if normalize_adv and len(adv) > 1 and adv.std() > 1e-8:
        adv = (adv - adv.mean()) / adv.std()

    total_units = sum(INSTR_CELLS if s.dtype == DecisionType.SPEECH else 1 for s in rl)
    policy_sum = 0.0
    entropy_sum = 0.0
    clipped_units = 0

    for dtype, idxs in _group_by_dtype(rl).items():
        sub_pe, sub_g = cache.player_emb[idxs], cache.g[idxs]
        if dtype == DecisionType.SPEECH:
            logits, head_cache = T.instr_head_forward(params, sub_pe, sub_g)
            logp = _log_softmax(logits)                                  # (b,9,18,6)
            p = np.exp(logp)
            cells = np.stack([rl[i].instr_cells for i in idxs]).astype(np.int64)
            old_lp = np.stack([rl[i].behavior_logp for i in idxs])
            new_lp = np.take_along_axis(logp, cells[..., None], axis=-1)[..., 0]
            ratio = np.exp(new_lp - old_lp)
            a = np.broadcast_to(adv[idxs][:, None, None], ratio.shape)
            bad = ~np.isfinite(ratio)
            if bad.any():
                stats.n_dropped += int(bad.sum())
                ratio = np.where(bad, 1.0, ratio)
                a = np.where(bad, 0.0, a)
            unclipped = ratio * a
            clipped = np.clip(ratio, 1 - clip, 1 + clip) * a
            policy_sum += float(-np.minimum(unclipped, clipped).sum())
            active = unclipped <= clipped + 1e-12
            clipped_units += int((~active).sum())
            ent = -(p * logp).sum(axis=-1)
            entropy_sum += float(ent.sum())
            if apply_grads:
                coef = np.where(active, ratio * a, 0.0)
                onehot = np.eye(6)[cells]
                dlogits = (coef[..., None] * (p - onehot)) / total_units
                dlogits += entropy_coef * p * (logp + ent[..., None]) / total_units
                dpe_h, dg_h = T.instr_head_backward(params, head_cache,
                                                    weight * dlogits, P, G)
                d_pe[idxs] += dpe_h
                d_g[idxs] += dg_h
        else:
            logits, head_cache = T.seat_head_forward(params, dtype, sub_pe, sub_g)
            mask = np.stack([rl[i].mask for i in idxs])
            logp = masked_log_softmax(logits, mask)
            p = np.where(mask, np.exp(logp), 0.0)
            acts = np.array([rl[i].action for i in idxs])
            old_lp = np.array([float(rl[i].behavior_logp) for i in idxs])
            new_lp = logp[np.arange(len(idxs)), acts]
            ratio = np.exp(new_lp - old_lp)
            a = adv[idxs]
            bad = ~np.isfinite(ratio)
            if bad.any():
                stats.n_dropped += int(bad.sum())
                ratio = np.where(bad, 1.0, ratio)
                a = np.where(bad, 0.0, a)
            unclipped = ratio * a
            clipped = np.clip(ratio, 1 - clip, 1 + clip) * a
            policy_sum += float(-np.minimum(unclipped, clipped).sum())
            active = unclipped <= clipped + 1e-12
            clipped_units += int((~active).sum())
            safe_logp = np.where(mask, logp, 0.0)
            ent = -(p * safe_logp).sum(axis=-1)
            entropy_sum += float(ent.sum())
            if apply_grads:
                coef = np.where(active, ratio * a, 0.0)
                onehot = np.zeros_like(p)
                onehot[np.arange(len(idxs)), acts] = 1.0
                dlogits = (coef[:, None] * (p - onehot)) / total_units
                dlogits += entropy_coef * p * (safe_logp + ent[:, None]) / total_units
                dpe_h, dg_h = T.seat_head_backward(params, dtype, head_cache,
                                                   weight * dlogits, P, G)
                d_pe[idxs] += dpe_h
                d_g[idxs] += dg_h

    v, v_cache = T.value_forward(params, cache.g)
    targets = np.array([s.value_target for s in rl])
    verr = v - targets
    stats.value = float(0.5 * (verr ** 2).mean())
    if apply_grads:
        dv = weight * value_coef * verr / len(rl)
        d_g += T.value_backward(params, v_cache, dv, G)

    stats.identity = _identity_loss(params, rl, range(len(rl)), cache, beta,
                                    apply_grads, d_pe, d_g)
    stats.policy = policy_sum / total_units
    stats.entropy = entropy_sum / total_units
    stats.clip_frac = clipped_units / max(total_units, 1)
    if apply_grads:
        T.trunk_backward(params, cache, d_pe, d_g)
    return stats


def bc_loss(samples: list[Sample], params: ThinkerParams, *,
            beta: float = 0.0, weight: float = 1.0,
            apply_grads: bool = True) -> LossStats:
    """Negative log-likelihood of logged decisions; BC samples only.

    `weight` scales only the cloning gradients (the Eq.-style alpha);
    the identity auxiliary keeps its own beta.  Logged actions illegal
    under the mask are dropped and counted.
    """
    stats = LossStats()
    bc = []
    for s in samples:
        if not s.is_bc:
            continue
        if s.dtype != DecisionType.SPEECH and (s.mask is None or not s.mask[s.action]):
            stats.n_dropped += 1
            continue
        bc.append(s)
    if not bc:
        return stats
    stats.n_bc = len(bc)
    binp = BatchInputs([s.snap for s in bc])
    cache = T.trunk_forward(params, binp)
    P, G = params.cfg.player_out, params.cfg.global_out
    d_pe = np.zeros_like(cache.player_emb)
    d_g = np.zeros_like(cache.g)
    total_units = sum(INSTR_CELLS if s.dtype == DecisionType.SPEECH else 1 for s in bc)
    nll_sum = 0.0

    for dtype, idxs in _group_by_dtype(bc).items():
        sub_pe, sub_g = cache.player_emb[idxs], cache.g[idxs]
        if dtype == DecisionType.SPEECH:
            logits, head_cache = T.instr_head_forward(params, sub_pe, sub_g)
            logp = _log_softmax(logits)
            cells = np.stack([bc[i].instr_cells for i in idxs]).astype(np.int64)
            chosen = np.take_along_axis(logp, cells[..., None], axis=-1)[..., 0]
            nll_sum += float(-chosen.sum())
            if apply_grads:
                onehot = np.eye(6)[cells]
                dlogits = (np.exp(logp) - onehot) / total_units
                dpe_h, dg_h = T.instr_head_backward(params, head_cache,
                                                    weight * dlogits, P, G)
                d_pe[idxs] += dpe_h
                d_g[idxs] += dg_h
        else:
            logits, head_cache = T.seat_head_forward(params, dtype, sub_pe, sub_g)
            mask = np.stack([bc[i].mask for i in idxs])
            logp = masked_log_softmax(logits, mask)
            acts = np.array([bc[i].action for i in idxs])
            nll_sum += float(-logp[np.arange(len(idxs)), acts].sum())
            if apply_grads:
                p = np.where(mask, np.exp(logp), 0.0)
                onehot = np.zeros_like(p)
                onehot[np.arange(len(idxs)), acts] = 1.0
                dlogits = (p - onehot) / total_units
                dpe_h, dg_h = T.seat_head_backward(params, dtype, head_cache,
                                                   weight * dlogits, P, G)
                d_pe[idxs] += dpe_h
                d_g[idxs] += dg_h

    stats.bc = nll_sum / total_units
    stats.identity = _identity_loss(params, bc, range(len(bc)), cache, beta,
                                    apply_grads, d_pe, d_g)
    if apply_grads:
        T.trunk_backward(params, cache, d_pe, d_g)
    return stats
