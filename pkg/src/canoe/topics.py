"""User-location topic model: collapsed-Gibbs LDA plus the preference head.

Users act as documents and visited locations as words. The fitted per-user
topic distribution is a frozen (non-differentiable) feature; only the
two-layer interaction head on top of it is learned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dcg, kernels
from .dcg import ParamRegistry, Tensor

__all__ = ["TopicModel", "build_cooccurrence", "fit_lda", "UserLocationHead"]


@dataclass
class TopicModel:
    """Fitted LDA posterior estimates; immutable after fitting."""

    n_topics: int
    theta: np.ndarray          # [n_users, n_topics], row-stochastic
    phi: np.ndarray            # [n_topics, n_locations], row-stochastic
    alpha: float
    beta: float
    gibbs_iters: int
    seed: int

    def user_topics(self, user: int) -> np.ndarray:
        if not (0 <= user < self.theta.shape[0]):
            raise IndexError(f"unknown user {user}")
        return self.theta[user]


def build_cooccurrence(location_lists: list[list[int]], n_locations: int) -> np.ndarray:
    """Visit-count matrix [n_users, n_locations] from per-user location lists."""
    counts = np.zeros((len(location_lists), n_locations), dtype=np.int64)
    for u, locs in enumerate(location_lists):
        for l in locs:
            counts[u, l] += 1
    return counts


def fit_lda(counts: np.ndarray, n_topics: int, alpha: float | None = None,
            beta: float = 0.01, iters: int = 500, seed: int = 0) -> TopicModel:
    """Collapsed Gibbs sampling on a user-location count matrix.

    alpha defaults to the symmetric 50/n_topics; theta and phi are estimated
    from the final sweep's assignment counts with prior smoothing.
    Deterministic given (counts, n_topics, priors, iters, seed).
    """
    counts = np.asarray(counts, dtype=np.int64)
    if n_topics < 2:
        raise ValueError(f"n_topics must be >= 2, got {n_topics}")
    if counts.sum() == 0:
        raise ValueError("empty corpus: co-occurrence matrix has no visits")
    if alpha is None:
        alpha = 50.0 / n_topics
    n_users, n_locations = counts.shape

    users, locs = np.nonzero(counts)
    reps = counts[users, locs]
    token_user = np.repeat(users, reps).astype(np.int64)
    token_loc = np.repeat(locs, reps).astype(np.int64)
    n_tokens = token_user.shape[0]

    rng = np.random.default_rng(seed)
    z = rng.integers(0, n_topics, size=n_tokens, dtype=np.int64)
    n_ut = np.zeros((n_users, n_topics), dtype=np.int64)
    n_tl = np.zeros((n_topics, n_locations), dtype=np.int64)
    n_t = np.zeros(n_topics, dtype=np.int64)
    np.add.at(n_ut, (token_user, z), 1)
    np.add.at(n_tl, (z, token_loc), 1)
    np.add.at(n_t, z, 1)

    for _ in range(iters):
        uniforms = rng.random(n_tokens)
        kernels.gibbs_sweep(token_user, token_loc, z, n_ut, n_tl, n_t,
                            alpha, beta, uniforms)

    theta = (n_ut + alpha) / (n_ut.sum(axis=1, keepdims=True) + n_topics * alpha)
    phi = (n_tl + beta) / (n_t[:, None] + n_locations * beta)
    return TopicModel(n_topics=n_topics, theta=theta, phi=phi, alpha=alpha,
                      beta=beta, gibbs_iters=iters, seed=seed)


class UserLocationHead:
    """Two-layer ReLU MLP mapping a topic distribution to a d-vector."""

    def __init__(self, registry: ParamRegistry, rng: np.random.Generator,
                 n_topics: int, dim: int, prefix: str = "ul_head",
                 init_scale: float = 0.1):
        self.w1 = registry.register(
            f"{prefix}.w1", rng.uniform(-init_scale, init_scale, (n_topics, dim)))
        self.b1 = registry.register(f"{prefix}.b1", np.zeros(dim))
        self.w2 = registry.register(
            f"{prefix}.w2", rng.uniform(-init_scale, init_scale, (dim, dim)))
        self.b2 = registry.register(f"{prefix}.b2", np.zeros(dim))

    def __call__(self, c_u: Tensor) -> Tensor:
        """c_u: [batch, n_topics] constant input -> [batch, dim]."""
        hidden = dcg.relu(dcg.matmul(c_u, self.w1) + self.b1)
        return dcg.matmul(hidden, self.w2) + self.b2
