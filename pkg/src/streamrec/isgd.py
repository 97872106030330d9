from __future__ import annotations

from typing import Iterable, Optional, Tuple, Union

import numpy as np

from .core import (
    INIT_STREAM,
    FactorMatrix,
    Hyperparameters,
    IdIndex,
    InteractionEvent,
    RankedList,
    Rng,
    exclusion_mask,
    node_seed,
    rank_by_distance_to_one,
)
from .exceptions import ModelDivergenceError, UnknownUserError

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike) -> Rng:
    """Plain integer seeds map to the node-0 initialization stream."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(node_seed(int(seed), 0, INIT_STREAM))


class IsgdModel:
    """
    Incremental SGD matrix factorization for positive-only streams.

    Every observed (user, item) pair is a target of 1 for A_u . B_i; each
    observation runs `hp.iter` SGD passes on the two affected rows. Items are
    ranked for a user by |1 - A_u . B_i| ascending.

    Usage:
        model = IsgdModel(Hyperparameters(k=8), seed=42)
        model.update(InteractionEvent("u1", "i9"))
        model.recommend("u1", 20, exclude={"i9"})

    `user_index` / `item_index` may be shared between several models (the
    ensemble does this); factor rows always stay private to the model.
    """

    def __init__(
        self,
        hp: Optional[Hyperparameters] = None,
        *,
        seed: SeedLike = 42,
        user_index: Optional[IdIndex] = None,
        item_index: Optional[IdIndex] = None,
        simultaneous: bool = False,
    ) -> None:
        self.hp = hp or Hyperparameters()
        self.rng = make_rng(seed)
        self.user_index = user_index if user_index is not None else IdIndex()
        self.item_index = item_index if item_index is not None else IdIndex()
        self.users = FactorMatrix(self.hp.k, init_mean=self.hp.init_mean, init_stddev=self.hp.init_stddev)
        self.items = FactorMatrix(self.hp.k, init_mean=self.hp.init_mean, init_stddev=self.hp.init_stddev)
        self.simultaneous = simultaneous

    @property
    def n_users(self) -> int:
        return self.users.n_rows

    @property
    def n_items(self) -> int:
        return self.items.n_rows

    # ---------- Contract ----------
    def knows_user(self, user: str) -> bool:
        idx = self.user_index.get(user)
        return idx is not None and self.users.has_row(idx)

    def knows_item(self, item: str) -> bool:
        idx = self.item_index.get(item)
        return idx is not None and self.items.has_row(idx)

    def score(self, user: str, item: str) -> Optional[float]:
        u_idx = self.user_index.get(user)
        i_idx = self.item_index.get(item)
        if u_idx is None or i_idx is None:
            return None
        if not (self.users.has_row(u_idx) and self.items.has_row(i_idx)):
            return None
        return float(np.dot(self.users.row(u_idx), self.items.row(i_idx)))

    def update(self, event: InteractionEvent) -> None:
        u_idx = self.user_index.intern(event.user)
        i_idx = self.item_index.intern(event.item)
        self.train_indices(u_idx, i_idx)

    def recommend(self, user: str, n: int, exclude: Iterable[str] = ()) -> RankedList:
        u_idx = self.user_index.get(user)
        if u_idx is None or not self.users.has_row(u_idx):
            raise UnknownUserError(f"unknown user {user!r}")
        n_items = len(self.item_index)
        scores, held = self.node_scores(u_idx, n_items)
        candidates = held & ~exclusion_mask(self.item_index, exclude, n_items)
        return rank_by_distance_to_one(scores, candidates, n, self.item_index)

    # ---------- Training ----------
    def train_indices(self, u_idx: int, i_idx: int, repeats: int = 1) -> None:
        """Lazily create missing rows (user first, then item), then train `repeats` times."""
        if not self.users.has_row(u_idx):
            self.users.init_row(u_idx, self.rng)
        if not self.items.has_row(i_idx):
            self.items.init_row(i_idx, self.rng)
        for _ in range(repeats):
            self.train_pair(u_idx, i_idx)

    def train_pair(self, u_idx: int, i_idx: int) -> None:
        """
        `hp.iter` passes of err = 1 - A_u.B_i followed by the A_u then B_i
        steps. B_i's step sees the already-updated A_u unless the model was
        built with simultaneous=True.
        """
        a = self.users.row(u_idx)
        b = self.items.row(i_idx)
        eta, lam = self.hp.eta, self.hp.lambda_
        for _ in range(self.hp.iter):
            err = 1.0 - float(np.dot(a, b))
            if self.simultaneous:
                a_prev = a.copy()
                a += eta * (err * b - lam * a)
                b += eta * (err * a_prev - lam * b)
            else:
                a += eta * (err * b - lam * a)
                b += eta * (err * a - lam * b)
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ModelDivergenceError(self.user_index.external(u_idx), self.item_index.external(i_idx))

    # ---------- Scoring ----------
    def node_scores(self, u_idx: int, n_items: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        A_u . B_j for j in 0..n_items-1, plus the mask of items this model
        holds a row for (scores of missing rows are 0).
        """
        a = self.users.row(u_idx)
        rows, present = self.items.dense()
        m = min(n_items, len(present))
        scores = np.zeros(n_items, dtype=np.float64)
        held = np.zeros(n_items, dtype=bool)
        if m:
            scores[:m] = rows[:m] @ a
            held[:m] = present[:m]
        return scores, held
