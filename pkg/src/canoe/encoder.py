"""Tri-pair interaction encoder.

Three pairwise context branches: user-location preferences through the
topic head, time-user alignment through oscillatory attention over the
smoothed slot table, and location-time dynamics through a causal
transformer over the context window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dcg
from .cnoa import CnoaAttention, OscillatorParams
from .dcg import ParamRegistry, Tensor
from .embeddings import EmbeddingTable, SmoothedTimeEmbedding
from .topics import UserLocationHead

__all__ = [
    "SeqEncoderConfig", "EncoderOutput", "positional_encoding", "causal_mask",
    "layer_norm", "TransformerLayer", "TimeUserPair", "LocationTimePair",
    "TpiEncoder",
]

_MASK_NEG = -1e30  # additive mask; exp underflows to exactly 0 after softmax


@dataclass
class SeqEncoderConfig:
    layers: int = 3
    heads: int = 2
    dropout: float = 0.1
    ff_width: int | None = None  # defaults to 4*dim

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if not (0.0 <= self.dropout < 1.0):
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")


@dataclass
class EncoderOutput:
    o_us: Tensor  # [batch, d]       user-location
    o_ut: Tensor  # [batch, d]       time-user
    o_st: Tensor  # [batch, T, 2d]   location-time, contextual half first


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Fixed sinusoidal position table [length, dim]."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angle[:, 0::2])
    pe[:, 1::2] = np.cos(angle[:, 1::2])
    return pe


def causal_mask(length: int) -> np.ndarray:
    """Additive [length, length] mask blocking attention to future positions."""
    return np.triu(np.full((length, length), _MASK_NEG), k=1)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = dcg.tensor_mean(x, axis=-1, keepdims=True)
    centered = x - mu
    var = dcg.tensor_mean(centered * centered, axis=-1, keepdims=True)
    return centered / dcg.sqrt(var + eps) * gamma + beta


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None,
             training: bool) -> Tensor:
    # Inverted dropout: scaling at train time, identity at evaluation.
    if not training or rate <= 0.0 or rng is None:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * dcg.constant(mask)


class TransformerLayer:
    """Post-LN encoder layer: masked self-attention then position-wise FF."""

    def __init__(self, registry: ParamRegistry, rng: np.random.Generator,
                 prefix: str, dim: int, heads: int, ff_width: int,
                 init_scale: float = 0.1):
        if dim % heads != 0:
            raise ValueError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self._scale = 1.0 / np.sqrt(self.head_dim)

        def weight(name, shape):
            return registry.register(f"{prefix}.{name}",
                                     rng.uniform(-init_scale, init_scale, shape))

        def bias(name, size):
            return registry.register(f"{prefix}.{name}", np.zeros(size))

        self.wq, self.bq = weight("wq", (dim, dim)), bias("bq", dim)
        self.wk, self.bk = weight("wk", (dim, dim)), bias("bk", dim)
        self.wv, self.bv = weight("wv", (dim, dim)), bias("bv", dim)
        self.wo, self.bo = weight("wo", (dim, dim)), bias("bo", dim)
        self.ln1_g = registry.register(f"{prefix}.ln1_g", np.ones(dim))
        self.ln1_b = bias("ln1_b", dim)
        self.ff_w1, self.ff_b1 = weight("ff_w1", (dim, ff_width)), bias("ff_b1", ff_width)
        self.ff_w2, self.ff_b2 = weight("ff_w2", (ff_width, dim)), bias("ff_b2", dim)
        self.ln2_g = registry.register(f"{prefix}.ln2_g", np.ones(dim))
        self.ln2_b = bias("ln2_b", dim)

    def _split_heads(self, t: Tensor, batch: int, length: int) -> Tensor:
        t = dcg.reshape(t, (batch, length, self.heads, self.head_dim))
        return dcg.transpose(t, (0, 2, 1, 3))

    def __call__(self, x: Tensor, mask: np.ndarray, dropout_rate: float,
                 rng: np.random.Generator | None, training: bool) -> Tensor:
        batch, length, dim = x.shape
        q = self._split_heads(dcg.matmul(x, self.wq) + self.bq, batch, length)
        k = self._split_heads(dcg.matmul(x, self.wk) + self.bk, batch, length)
        v = self._split_heads(dcg.matmul(x, self.wv) + self.bv, batch, length)
        scores = dcg.matmul(q, dcg.transpose(k, (0, 1, 3, 2))) * self._scale
        alpha = dcg.softmax(scores + dcg.constant(mask), axis=-1)
        ctx = dcg.matmul(alpha, v)
        ctx = dcg.reshape(dcg.transpose(ctx, (0, 2, 1, 3)), (batch, length, dim))
        attn_out = dcg.matmul(ctx, self.wo) + self.bo
        x = layer_norm(x + _dropout(attn_out, dropout_rate, rng, training),
                       self.ln1_g, self.ln1_b)
        ff = dcg.matmul(dcg.relu(dcg.matmul(x, self.ff_w1) + self.ff_b1),
                        self.ff_w2) + self.ff_b2
        return layer_norm(x + _dropout(ff, dropout_rate, rng, training),
                          self.ln2_g, self.ln2_b)


class TimeUserPair:
    """Query [user ; current slot] against the full smoothed slot table."""

    def __init__(self, registry: ParamRegistry, rng: np.random.Generator,
                 user_table: EmbeddingTable, time_emb: SmoothedTimeEmbedding,
                 dim: int, n_heads: int, osc: OscillatorParams, variant: str):
        self.user_table = user_table
        self.time_emb = time_emb
        self.dim = dim
        self.attn = CnoaAttention(registry, rng, "time_user.attn",
                                  dim_q=2 * dim, dim_kv=dim, dim_out=dim,
                                  n_heads=n_heads, osc=osc, variant=variant)

    def __call__(self, users: np.ndarray, current_slots: np.ndarray,
                 update_state: bool = True) -> Tensor:
        batch = len(users)
        e_u = self.user_table.lookup(users)
        e_h = self.time_emb.lookup(current_slots)
        query = dcg.reshape(dcg.concat([e_u, e_h], axis=-1), (batch, 1, 2 * self.dim))
        table = self.time_emb.smoothed_table()
        out = self.attn(query, table, table, update_state=update_state)
        return dcg.reshape(out, (batch, self.dim))


class LocationTimePair:
    """Causal transformer over [location ; slot] context embeddings.

    The 2d inputs are linearly projected to d before positional encoding;
    the output keeps both the contextualized rows and the projected inputs:
    O_st = [H ; X_proj] per row.
    """

    def __init__(self, registry: ParamRegistry, rng: np.random.Generator,
                 loc_table: EmbeddingTable, time_emb: SmoothedTimeEmbedding,
                 dim: int, cfg: SeqEncoderConfig, init_scale: float = 0.1):
        self.loc_table = loc_table
        self.time_emb = time_emb
        self.dim = dim
        self.cfg = cfg
        ff = cfg.ff_width if cfg.ff_width is not None else 4 * dim
        self.in_w = registry.register(
            "loc_time.in_w", rng.uniform(-init_scale, init_scale, (2 * dim, dim)))
        self.in_b = registry.register("loc_time.in_b", np.zeros(dim))
        self.layers = [
            TransformerLayer(registry, rng, f"loc_time.layer{i}", dim,
                             cfg.heads, ff)
            for i in range(cfg.layers)
        ]
        self._pe_cache: dict[int, np.ndarray] = {}
        self._mask_cache: dict[int, np.ndarray] = {}

    def __call__(self, ctx_locs: np.ndarray, ctx_slots: np.ndarray,
                 rng: np.random.Generator | None = None,
                 training: bool = False) -> Tensor:
        ctx_locs = np.asarray(ctx_locs)
        if ctx_locs.ndim != 2 or ctx_locs.shape[1] == 0:
            raise ValueError("context must be a non-empty [batch, length] array")
        length = ctx_locs.shape[1]
        e_l = self.loc_table.lookup(ctx_locs)
        e_t = self.time_emb.lookup(ctx_slots)
        x = dcg.concat([e_l, e_t], axis=-1)
        x_proj = dcg.matmul(x, self.in_w) + self.in_b
        if length not in self._pe_cache:
            self._pe_cache[length] = positional_encoding(length, self.dim)
            self._mask_cache[length] = causal_mask(length)
        h = x_proj * np.sqrt(self.dim) + dcg.constant(self._pe_cache[length])
        mask = self._mask_cache[length]
        for layer in self.layers:
            h = layer(h, mask, self.cfg.dropout, rng, training)
        return dcg.concat([h, x_proj], axis=-1)


class TpiEncoder:
    """Bundle of the three pair branches producing (O_us, O_ut, O_st)."""

    def __init__(self, ul_head: UserLocationHead, time_user: TimeUserPair,
                 loc_time: LocationTimePair):
        self.ul_head = ul_head
        self.time_user = time_user
        self.loc_time = loc_time

    def encode_batch(self, users: np.ndarray, ctx_locs: np.ndarray,
                     ctx_slots: np.ndarray, user_topics: np.ndarray,
                     rng: np.random.Generator | None = None,
                     training: bool = False,
                     update_state: bool = True) -> EncoderOutput:
        ctx_slots = np.asarray(ctx_slots)
        o_us = self.ul_head(dcg.constant(user_topics))
        # The decoding step's "current hour" is the most recent known slot.
        o_ut = self.time_user(users, ctx_slots[:, -1], update_state=update_state)
        o_st = self.loc_time(ctx_locs, ctx_slots, rng=rng, training=training)
        return EncoderOutput(o_us=o_us, o_ut=o_ut, o_st=o_st)
