"""The decision network: shared per-seat encoders, mean pooling, typed heads.

Per-seat streams use shared weights and the global stream is a mean over
seats, so relabeling seats permutes per-seat outputs exactly.  Heads:
one seat-scoring head per action type (plus global-option logits), a 9x18x6
speech-instruction head, a 9x5 identity head, and a scalar value head.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..engine import Decision, DecisionType, Observation
from ..protocol import FeatureHistory, N_PLAYERS
from . import features as F
from .features import (CTX_DIM, PUB_DIM, ROW_DIM, DECISION_ORDER, GLOBAL_OPTS,
                       SEAT_KIND, SpeechTape, legal_mask, n_options)
from .nets import Adam, Mlp, load_checkpoint, masked_log_softmax, save_checkpoint, softmax

SEAT_HEAD_TYPES = (DecisionType.WOLF_KILL, DecisionType.WITCH, DecisionType.SEER,
                   DecisionType.VOTE, DecisionType.HUNTER)
GO_HEAD_TYPES = {DecisionType.WITCH: 2, DecisionType.VOTE: 1,
                 DecisionType.HUNTER: 1, DecisionType.SUICIDE: 2}
INSTR_OUT = 18 * 6


@dataclass
class ThinkerConfig:
    row_hidden: int = 64
    row_out: int = 32
    player_hidden: int = 96
    player_out: int = 64
    global_hidden: int = 96
    global_out: int = 64
    head_hidden: int = 32
    instr_hidden: int = 64
    seed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d: dict) -> "ThinkerConfig":
        return ThinkerConfig(**d)


# The reference widths reported for the original three-stage encoder
# (speech, per-player, all-players).  Feature layouts differ here, so these
# are documentation, not defaults.
REFERENCE_WIDTHS = {"speech": (181, 256, 256), "player": (1019, 512, 512),
                    "all_players": (523, 512, 512)}


class ThinkerParams:
    """All network weights for one policy (one faction of one member)."""

    def __init__(self, cfg: ThinkerConfig, rng: Optional[np.random.Generator] = None):
        self.cfg = cfg
        rng = rng or np.random.default_rng(cfg.seed)
        c = cfg
        pg = c.player_out + c.global_out
        self.nets: dict[str, Mlp] = {}

        def make(name, sizes):
            self.nets[name] = Mlp(name, sizes, rng)

        make("rows_spk", [ROW_DIM, c.row_hidden, c.row_out])
        make("rows_abt", [ROW_DIM, c.row_hidden, c.row_out])
        make("player", [2 * c.row_out + PUB_DIM, c.player_hidden, c.player_out])
        make("global", [c.player_out + CTX_DIM, c.global_hidden, c.global_out])
        for dt in SEAT_HEAD_TYPES:
            make(f"seat_{dt.value}", [pg, c.head_hidden, 1])
        for dt, k in GO_HEAD_TYPES.items():
            make(f"go_{dt.value}", [c.global_out, c.head_hidden, k])
        make("instr", [pg, c.instr_hidden, INSTR_OUT])
        make("identity", [pg, c.head_hidden, 5])
        make("value", [c.global_out, c.head_hidden, 1])

    def all_nets(self) -> list[Mlp]:
        return list(self.nets.values())

    def zero_grads(self) -> None:
        for net in self.nets.values():
            net.zero_grads()

    def n_params(self) -> int:
        return sum(net.n_params() for net in self.nets.values())

    def copy(self) -> "ThinkerParams":
        p = ThinkerParams.__new__(ThinkerParams)
        p.cfg = self.cfg
        p.nets = {k: v.copy() for k, v in self.nets.items()}
        return p

    def save(self, path, meta: Optional[dict] = None) -> None:
        meta = dict(meta or {})
        meta["config"] = self.cfg.to_dict()
        save_checkpoint(path, self.all_nets(), meta)

    @staticmethod
    def load(path) -> "ThinkerParams":
        nets, meta = load_checkpoint(path)
        cfg = ThinkerConfig.from_dict(meta["config"])
        params = ThinkerParams(cfg)
        for name in params.nets:
            if name not in nets:
                raise ValueError(f"checkpoint is missing net {name}")
            params.nets[name] = nets[name]
        return params


# ------------------------------------------------------------ batch inputs

class _SegmentMean:
    """Mean of src[idx] per destination group; groups must be sorted."""

    def __init__(self, idx: np.ndarray, groups: np.ndarray, n_groups: int, n_src: int):
        self.idx = idx
        self.groups = groups
        self.n_groups = n_groups
        self.n_src = n_src
        if len(groups):
            self.uniq, starts = np.unique(groups, return_index=True)
            self.starts = starts
            counts = np.diff(np.append(starts, len(groups)))
            self.counts = counts
            self.per_elem_count = np.repeat(counts, counts).astype(np.float64)
            perm = np.argsort(idx, kind="stable")
            self.perm = perm
            sidx = idx[perm]
            self.src_uniq, self.src_starts = np.unique(sidx, return_index=True)

    def forward(self, src: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n_groups, src.shape[1]))
        if len(self.groups):
            sums = np.add.reduceat(src[self.idx], self.starts, axis=0)
            out[self.uniq] = sums / self.counts[:, None]
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dsrc = np.zeros((self.n_src, dout.shape[1]))
        if len(self.groups):
            dvals = dout[self.groups] / self.per_elem_count[:, None]
            dsorted = dvals[self.perm]
            dsrc[self.src_uniq] = np.add.reduceat(dsorted, self.src_starts, axis=0)
        return dsrc


@dataclass
class ObsSnapshot:
    """One decision point, flattened for the network (tape shared per game)."""

    tape: SpeechTape
    cutoff: int
    pub: np.ndarray   # (9, PUB_DIM)
    ctx: np.ndarray   # (CTX_DIM,)

    @staticmethod
    def capture(obs: Observation, tape: SpeechTape,
                decision: Optional[Decision] = None) -> "ObsSnapshot":
        tape.sync_from(obs.speeches)
        return ObsSnapshot(tape=tape, cutoff=len(obs.speeches),
                           pub=F.public_features(obs),
                           ctx=F.context_features(obs, decision))


class BatchInputs:
    def __init__(self, items: list[ObsSnapshot]):
        self.B = len(items)
        key_to_compact: dict[tuple[int, int], int] = {}
        blocks: list[np.ndarray] = []
        spk_idx: list[int] = []
        spk_groups: list[int] = []
        abt_idx: list[int] = []
        abt_groups: list[int] = []

        def intern(tape: SpeechTape, rec: int) -> int:
            key = (id(tape), rec)
            got = key_to_compact.get(key)
            if got is None:
                got = len(blocks)
                key_to_compact[key] = got
                blocks.append(tape.blocks[rec])
            return got

        for b, it in enumerate(items):
            for seat in range(1, N_PLAYERS + 1):
                group = b * N_PLAYERS + seat - 1
                for rec in it.tape.speaker_items(seat, it.cutoff):
                    spk_idx.append(intern(it.tape, rec))
                    spk_groups.append(group)
                for rec in it.tape.about_rows(seat, it.cutoff):
                    abt_idx.append(intern(it.tape, rec) * N_PLAYERS + seat - 1)
                    abt_groups.append(group)
        self.n_records = len(blocks)
        self.row_inputs = (np.concatenate(blocks, axis=0) if blocks
                           else np.zeros((0, ROW_DIM)))
        n_groups = self.B * N_PLAYERS
        self.spk = _SegmentMean(np.asarray(spk_idx, dtype=np.int64),
                                np.asarray(spk_groups, dtype=np.int64),
                                n_groups, self.n_records)
        self.abt = _SegmentMean(np.asarray(abt_idx, dtype=np.int64),
                                np.asarray(abt_groups, dtype=np.int64),
                                n_groups, self.n_records * N_PLAYERS)
        self.pub = np.stack([it.pub for it in items])
        self.ctx = np.stack([it.ctx for it in items])


# ------------------------------------------------------------------- trunk

@dataclass
class TrunkCache:
    binp: BatchInputs
    spk_rows_cache: list = None
    abt_rows_cache: list = None
    player_cache: list = None
    global_cache: list = None
    speech_emb: np.ndarray = None
    about_emb: np.ndarray = None
    player_emb: np.ndarray = None
    g: np.ndarray = None


def trunk_forward(params: ThinkerParams, binp: BatchInputs) -> TrunkCache:
    c = params.cfg
    B = binp.B
    cache = TrunkCache(binp=binp)
    if binp.n_records:
        spk_rows, cache.spk_rows_cache = params.nets["rows_spk"].forward(binp.row_inputs)
        rec_emb = spk_rows.reshape(binp.n_records, N_PLAYERS, c.row_out).mean(axis=1)
        abt_rows, cache.abt_rows_cache = params.nets["rows_abt"].forward(binp.row_inputs)
    else:
        rec_emb = np.zeros((0, c.row_out))
        abt_rows = np.zeros((0, c.row_out))
    speech_emb = binp.spk.forward(rec_emb)                    # (B*9, row_out)
    about_emb = binp.abt.forward(abt_rows)                    # (B*9, row_out)
    cache.speech_emb, cache.about_emb = speech_emb, about_emb
    player_in = np.concatenate(
        [speech_emb, about_emb, binp.pub.reshape(B * N_PLAYERS, PUB_DIM)], axis=1)
    player_flat, cache.player_cache = params.nets["player"].forward(player_in)
    player_emb = player_flat.reshape(B, N_PLAYERS, c.player_out)
    pooled = player_emb.mean(axis=1)
    global_in = np.concatenate([pooled, binp.ctx], axis=1)
    g, cache.global_cache = params.nets["global"].forward(global_in)
    cache.player_emb, cache.g = player_emb, g
    return cache


def trunk_backward(params: ThinkerParams, cache: TrunkCache,
                   d_player_emb: np.ndarray, d_g: np.ndarray) -> None:
    c = params.cfg
    binp = cache.binp
    B = binp.B
    d_global_in = params.nets["global"].backward(cache.global_cache, d_g)
    d_pooled = d_global_in[:, :c.player_out]
    d_player_emb = d_player_emb + d_pooled[:, None, :] / N_PLAYERS
    d_player_flat = params.nets["player"].backward(
        cache.player_cache, d_player_emb.reshape(B * N_PLAYERS, c.player_out))
    d_speech = d_player_flat[:, :c.row_out]
    d_about = d_player_flat[:, c.row_out:2 * c.row_out]
    if binp.n_records:
        d_rec = binp.spk.backward(d_speech)                   # (R, row_out)
        d_rows_spk = np.repeat(d_rec / N_PLAYERS, N_PLAYERS, axis=0)
        params.nets["rows_spk"].backward(cache.spk_rows_cache, d_rows_spk)
        d_rows_abt = binp.abt.backward(d_about)
        params.nets["rows_abt"].backward(cache.abt_rows_cache, d_rows_abt)


# -------------------------------------------------------------------- heads

def seat_head_forward(params: ThinkerParams, dtype: DecisionType,
                      player_emb: np.ndarray, g: np.ndarray):
    """(b,9,P),(b,G) -> logits (b, n_options) plus caches for backward."""
    b = player_emb.shape[0]
    caches = {}
    parts = []
    if SEAT_KIND[dtype] is not None:
        head = params.nets[f"seat_{dtype.value}"]
        inp = np.concatenate(
            [player_emb.reshape(b * N_PLAYERS, -1),
             np.repeat(g, N_PLAYERS, axis=0)], axis=1)
        out, caches["seat"] = head.forward(inp)
        parts.append(out.reshape(b, N_PLAYERS))
    k = GO_HEAD_TYPES.get(dtype)
    if k:
        go, caches["go"] = params.nets[f"go_{dtype.value}"].forward(g)
        parts.append(go)
    return np.concatenate(parts, axis=1), caches


def seat_head_backward(params: ThinkerParams, dtype: DecisionType, caches,
                       dlogits: np.ndarray, P: int, G: int):
    b = dlogits.shape[0]
    d_pe = np.zeros((b, N_PLAYERS, P))
    d_g = np.zeros((b, G))
    col = 0
    if SEAT_KIND[dtype] is not None:
        dseat = dlogits[:, :N_PLAYERS].reshape(b * N_PLAYERS, 1)
        dinp = params.nets[f"seat_{dtype.value}"].backward(caches["seat"], dseat)
        d_pe += dinp[:, :P].reshape(b, N_PLAYERS, P)
        d_g += dinp[:, P:].reshape(b, N_PLAYERS, G).sum(axis=1)
        col = N_PLAYERS
    k = GO_HEAD_TYPES.get(dtype)
    if k:
        d_g += params.nets[f"go_{dtype.value}"].backward(caches["go"], dlogits[:, col:])
    return d_pe, d_g


def instr_head_forward(params: ThinkerParams, player_emb: np.ndarray, g: np.ndarray):
    b = player_emb.shape[0]
    inp = np.concatenate(
        [player_emb.reshape(b * N_PLAYERS, -1), np.repeat(g, N_PLAYERS, axis=0)], axis=1)
    out, cache = params.nets["instr"].forward(inp)
    return out.reshape(b, N_PLAYERS, 18, 6), cache


def instr_head_backward(params: ThinkerParams, cache, dlogits, P: int, G: int):
    b = dlogits.shape[0]
    dinp = params.nets["instr"].backward(cache, dlogits.reshape(b * N_PLAYERS, INSTR_OUT))
    d_pe = dinp[:, :P].reshape(b, N_PLAYERS, P)
    d_g = dinp[:, P:].reshape(b, N_PLAYERS, G).sum(axis=1)
    return d_pe, d_g


def identity_forward(params: ThinkerParams, player_emb: np.ndarray, g: np.ndarray):
    b = player_emb.shape[0]
    inp = np.concatenate(
        [player_emb.reshape(b * N_PLAYERS, -1), np.repeat(g, N_PLAYERS, axis=0)], axis=1)
    out, cache = params.nets["identity"].forward(inp)
    return out.reshape(b, N_PLAYERS, 5), cache


def identity_backward(params: ThinkerParams, cache, dlogits, P: int, G: int):
    b = dlogits.shape[0]
    dinp = params.nets["identity"].backward(cache, dlogits.reshape(b * N_PLAYERS, 5))
    d_pe = dinp[:, :P].reshape(b, N_PLAYERS, P)
    d_g = dinp[:, P:].reshape(b, N_PLAYERS, G).sum(axis=1)
    return d_pe, d_g


def value_forward(params: ThinkerParams, g: np.ndarray):
    out, cache = params.nets["value"].forward(g)
    return out[:, 0], cache


def value_backward(params: ThinkerParams, cache, dv: np.ndarray, G: int):
    return params.nets["value"].backward(cache, dv[:, None])


# --------------------------------------------------------------- inference

@dataclass
class ForwardOutput:
    decision: Decision
    action_logits: Optional[np.ndarray]   # (n_options,) masked with -inf
    mask: Optional[np.ndarray]
    instr_logits: Optional[np.ndarray]    # (9,18,6) for speech decisions
    identity: np.ndarray                  # (9,5) rows sum to 1
    value: float


def encode(params: ThinkerParams, obs: Observation,
           hist: Optional[FeatureHistory] = None,
           tape: Optional[SpeechTape] = None):
    """Embeddings for one observation: per-seat speech/about/player + global."""
    if tape is None:
        tape = SpeechTape()
        speeches = hist.all_records() if hist is not None else obs.speeches
        for fm in speeches:
            tape.append(fm)
        cutoff = len(tape)
    else:
        tape.sync_from(obs.speeches)
        cutoff = len(obs.speeches)
    snap = ObsSnapshot(tape=tape, cutoff=cutoff, pub=F.public_features(obs),
                       ctx=F.context_features(obs, None))
    cache = trunk_forward(params, BatchInputs([snap]))
    return {
        "speech": cache.speech_emb.reshape(N_PLAYERS, -1),
        "about": cache.about_emb.reshape(N_PLAYERS, -1),
        "player": cache.player_emb[0],
        "global": cache.g[0],
    }


def forward(params: ThinkerParams, obs: Observation,
            decision: Optional[Decision] = None,
            tape: Optional[SpeechTape] = None) -> ForwardOutput:
    """Masked head outputs for one decision point."""
    decision = decision if decision is not None else obs.pending
    if decision is None:
        raise ValueError("no pending decision for this seat")
    if decision.kind != DecisionType.SPEECH and not decision.options:
        raise ValueError("empty legal action set (engine bug)")
    if tape is None:
        tape = SpeechTape()
    snap = ObsSnapshot.capture(obs, tape, decision)
    cache = trunk_forward(params, BatchInputs([snap]))
    pe, g = cache.player_emb, cache.g
    id_logits, _ = identity_forward(params, pe, g)
    identity = softmax(id_logits[0], axis=-1)
    value, _ = value_forward(params, g)
    action_logits = mask = instr_logits = None
    if decision.kind == DecisionType.SPEECH:
        il, _ = instr_head_forward(params, pe, g)
        instr_logits = il[0]
    else:
        logits, _ = seat_head_forward(params, decision.kind, pe, g)
        mask = legal_mask(decision)
        action_logits = np.where(mask, logits[0], -np.inf)
    return ForwardOutput(decision=decision, action_logits=action_logits, mask=mask,
                         instr_logits=instr_logits, identity=identity,
                         value=float(value[0]))


def sample_action(out: ForwardOutput, temperature: float,
                  rng: np.random.Generator):
    """Masked categorical draw; returns (option index, behavior log-prob)."""
    mask = out.mask
    logits = out.action_logits
    legal = np.flatnonzero(mask)
    if len(legal) == 1:
        return int(legal[0]), 0.0
    if temperature <= 0.0:
        return int(np.argmax(logits)), 0.0
    logp = masked_log_softmax(logits[None, :] / temperature, mask[None, :])[0]
    p = np.exp(logp)
    choice = int(rng.choice(len(p), p=p / p.sum()))
    return choice, float(logp[choice])


def sample_instruction(out: ForwardOutput, temperature: float,
                       rng: np.random.Generator):
    """Per-cell categorical draws; returns (cells (9,18) uint8, logp (9,18))."""
    logits = out.instr_logits
    if temperature <= 0.0:
        cells = np.argmax(logits, axis=-1).astype(np.uint8)
        return cells, np.zeros((N_PLAYERS, 18))
    logp = logits / temperature
    logp = logp - logp.max(axis=-1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=-1, keepdims=True))
    p = np.exp(logp)
    u = rng.random((N_PLAYERS, 18, 1))
    cells = (p.cumsum(axis=-1) > u).argmax(axis=-1).astype(np.uint8)
    chosen_logp = np.take_along_axis(logp, cells[:, :, None].astype(np.int64),
                                     axis=-1)[:, :, 0]
    return cells, chosen_logp
