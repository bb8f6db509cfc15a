"""Full next-location model: embeddings, tri-pair encoder, decoder, losses.

All forward paths are batched (leading batch axis); parameters live in one
registry so the optimizer and gradient checker see everything. The topic
matrix is a frozen input fitted upstream, never gradient-trained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dcg
from .cnoa import OscillatorParams
from .data import WindowSample
from .decoder import CrossContextDecoder, LossWeights, cross_entropy
from .dcg import ParamRegistry, Tensor
from .embeddings import EmbeddingTable, SmoothedTimeEmbedding
from .encoder import (LocationTimePair, SeqEncoderConfig, TimeUserPair,
                      TpiEncoder)
from .topics import UserLocationHead

__all__ = ["ModelConfig", "Batch", "CanoeModel", "batch_from_samples"]


@dataclass
class ModelConfig:
    dim: int = 16
    n_slots: int = 24
    sigma: float = 1.0
    attn_heads: int = 2
    n_topics: int = 450
    attention: str = "cnoa"            # "cross" selects the ablation variant
    decoder_query: str = "user_location"
    osc: OscillatorParams = field(default_factory=OscillatorParams)
    encoder: SeqEncoderConfig = field(default_factory=SeqEncoderConfig)
    init_scale: float = 0.1

    def __post_init__(self):
        if self.dim % self.attn_heads != 0:
            raise ValueError(
                f"dim {self.dim} not divisible by attn_heads {self.attn_heads}")
        if self.dim % self.encoder.heads != 0:
            raise ValueError(
                f"dim {self.dim} not divisible by encoder heads {self.encoder.heads}")
        if self.attention not in ("cnoa", "cross"):
            raise ValueError(f"unknown attention variant '{self.attention}'")


@dataclass
class Batch:
    users: np.ndarray          # [B]
    ctx_locs: np.ndarray       # [B, T]
    ctx_slots: np.ndarray      # [B, T]
    target_locs: np.ndarray    # [B]
    target_slots: np.ndarray   # [B]


def batch_from_samples(samples: list[WindowSample]) -> Batch:
    return Batch(
        users=np.array([s.user for s in samples], dtype=np.int64),
        ctx_locs=np.array([s.context_locations for s in samples], dtype=np.int64),
        ctx_slots=np.array([s.context_slots for s in samples], dtype=np.int64),
        target_locs=np.array([s.target_location for s in samples], dtype=np.int64),
        target_slots=np.array([s.target_slot for s in samples], dtype=np.int64),
    )


class CanoeModel:
    def __init__(self, cfg: ModelConfig, n_users: int, n_locations: int,
                 topic_theta: np.ndarray, seed: int = 0):
        if topic_theta.shape != (n_users, cfg.n_topics):
            raise ValueError(
                f"topic matrix shape {topic_theta.shape} does not match "
                f"({n_users}, {cfg.n_topics})")
        self.cfg = cfg
        self.n_users = n_users
        self.n_locations = n_locations
        self.topic_theta = np.asarray(topic_theta, dtype=np.float64)
        self.registry = ParamRegistry()
        rng = np.random.default_rng([seed, 202])
        d = cfg.dim

        self.time_emb = SmoothedTimeEmbedding(
            self.registry, rng, n_slots=cfg.n_slots, dim=d, sigma=cfg.sigma,
            init_scale=cfg.init_scale)
        self.user_table = EmbeddingTable(self.registry, rng, n_users, d,
                                         "user_table", cfg.init_scale)
        self.loc_table = EmbeddingTable(self.registry, rng, n_locations, d,
                                        "loc_table", cfg.init_scale)
        ul_head = UserLocationHead(self.registry, rng, cfg.n_topics, d,
                                   init_scale=cfg.init_scale)
        time_user = TimeUserPair(self.registry, rng, self.user_table,
                                 self.time_emb, d, cfg.attn_heads, cfg.osc,
                                 cfg.attention)
        loc_time = LocationTimePair(self.registry, rng, self.loc_table,
                                    self.time_emb, d, cfg.encoder,
                                    cfg.init_scale)
        self.encoder = TpiEncoder(ul_head, time_user, loc_time)
        self.decoder = CrossContextDecoder(
            self.registry, rng, d, n_locations, cfg.n_slots, cfg.attn_heads,
            cfg.osc, variant=cfg.attention, query_source=cfg.decoder_query,
            init_scale=cfg.init_scale)

    def reset_states(self) -> None:
        self.encoder.time_user.attn.reset_state()
        self.decoder.attn.reset_state()

    def forward_batch(self, batch: Batch,
                      rng: np.random.Generator | None = None,
                      training: bool = False) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (location logits, time logits, auxiliary logits)."""
        enc = self.encoder.encode_batch(
            batch.users, batch.ctx_locs, batch.ctx_slots,
            self.topic_theta[batch.users], rng=rng, training=training,
            update_state=training)
        e_u = self.user_table.lookup(batch.users)
        y_hat, fused_in = self.decoder(enc, e_u, update_state=training)
        return (self.decoder.location_logits(y_hat),
                self.decoder.time_logits(enc.o_ut),
                self.decoder.aux_logits(fused_in))

    def loss_batch(self, batch: Batch, weights: LossWeights,
                   rng: np.random.Generator | None = None,
                   training: bool = False) -> tuple[Tensor, dict[str, float]]:
        """Weighted three-term objective plus unweighted component values."""
        loc_logits, time_logits, aux_logits = self.forward_batch(
            batch, rng=rng, training=training)
        loss_loc = cross_entropy(loc_logits, batch.target_locs)
        loss_time = cross_entropy(time_logits, batch.target_slots)
        loss_aux = cross_entropy(aux_logits, batch.target_locs)
        total = (loss_loc * weights.loc + loss_time * weights.time
                 + loss_aux * weights.aux)
        parts = {"loc": loss_loc.item(), "time": loss_time.item(),
                 "aux": loss_aux.item(), "total": total.item()}
        return total, parts

    def location_probs(self, batch: Batch) -> np.ndarray:
        with dcg.no_grad():
            loc_logits, _, _ = self.forward_batch(batch, training=False)
            return dcg.softmax(loc_logits, axis=-1).data

    def rank_targets(self, batch: Batch) -> np.ndarray:
        """1-indexed rank of each target; probability ties break by
        ascending location id."""
        probs = self.location_probs(batch)
        n = probs.shape[0]
        target_p = probs[np.arange(n), batch.target_locs]
        ids = np.arange(self.n_locations)
        better = (probs > target_p[:, None]).sum(axis=1)
        tied_smaller = ((probs == target_p[:, None])
                        & (ids[None, :] < batch.target_locs[:, None])).sum(axis=1)
        return (better + tied_smaller + 1).astype(np.int64)
