"""First-order mobility Markov chain baseline.

Per-user transition counts over consecutive activity locations, with a
global transition table and global popularity as cold-start fallbacks.
Ranking is a total order: per-user count desc, then global count desc,
then ascending location id; states unseen everywhere rank by popularity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TransitionModel", "fit_mmc", "rank_locations", "rank_of_target"]


@dataclass
class TransitionModel:
    n_locations: int
    per_user: dict[tuple[int, int], Counter] = field(default_factory=dict)
    global_counts: dict[int, Counter] = field(default_factory=dict)
    popularity: Counter = field(default_factory=Counter)


def fit_mmc(train_regions: dict[int, list[int]], n_locations: int) -> TransitionModel:
    """Count consecutive pairs inside each user's training subsequence."""
    if not any(train_regions.values()):
        raise ValueError("empty training set for the Markov baseline")
    model = TransitionModel(n_locations=n_locations)
    for user, locs in train_regions.items():
        for src, dst in zip(locs[:-1], locs[1:]):
            model.per_user.setdefault((user, src), Counter())[dst] += 1
            model.global_counts.setdefault(src, Counter())[dst] += 1
        model.popularity.update(locs)
    return model


def _count_rows(model: TransitionModel, user: int,
                current_loc: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Dense (user-row, global-row) count vectors, or None when the state
    was never observed anywhere (popularity fallback)."""
    u_row = model.per_user.get((user, current_loc))
    g_row = model.global_counts.get(current_loc)
    if not u_row and not g_row:
        return None
    u = np.zeros(model.n_locations, dtype=np.int64)
    g = np.zeros(model.n_locations, dtype=np.int64)
    if u_row:
        for loc, c in u_row.items():
            u[loc] = c
    if g_row:
        for loc, c in g_row.items():
            g[loc] = c
    return u, g


def _popularity_row(model: TransitionModel) -> np.ndarray:
    pop = np.zeros(model.n_locations, dtype=np.int64)
    for loc, c in model.popularity.items():
        pop[loc] = c
    return pop


def rank_locations(model: TransitionModel, user: int, current_loc: int) -> list[int]:
    """All candidate locations, best first."""
    rows = _count_rows(model, user, current_loc)
    ids = np.arange(model.n_locations)
    if rows is None:
        pop = _popularity_row(model)
        order = np.lexsort((ids, -pop))
    else:
        u, g = rows
        order = np.lexsort((ids, -g, -u))
    return order.tolist()


def rank_of_target(model: TransitionModel, user: int, current_loc: int,
                   target: int) -> int:
    """1-indexed rank of the target under the baseline's total order."""
    rows = _count_rows(model, user, current_loc)
    ids = np.arange(model.n_locations)
    if rows is None:
        pop = _popularity_row(model)
        better = (pop > pop[target]) | ((pop == pop[target]) & (ids < target))
    else:
        u, g = rows
        ut, gt = u[target], g[target]
        better = (u > ut) | ((u == ut) & (g > gt)) \
            | ((u == ut) & (g == gt) & (ids < target))
    return int(better.sum()) + 1
