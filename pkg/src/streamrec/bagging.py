"""
Online bagging over ISGD nodes.

Each of the M nodes sees every event c times, c ~ Poisson(1) drawn
independently per node and per event; this approximates training every node
on its own bootstrap sample of an unbounded stream. Scores are the average of
the node scores.
"""

from __future__ import annotations

import logging
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from typing_extensions import Protocol

from .core import (
    INIT_STREAM,
    SAMPLER_STREAM,
    Hyperparameters,
    IdIndex,
    InteractionEvent,
    RankedList,
    exclusion_mask,
    node_seed,
    rank_by_distance_to_one,
)
from .exceptions import ConfigError, ModelDivergenceError, UnknownUserError
from .isgd import IsgdModel, SeedLike, make_rng
from .types import Aggregation, WarmupMode

_logger = logging.getLogger(__name__)


class Sampler(Protocol):
    def draw(self) -> int: ...


class PoissonSampler:
    """Bootstrap counts with P(c = k) = e^-1 / k!."""

    def __init__(self, seed: SeedLike) -> None:
        self.rng = make_rng(seed)

    def draw(self) -> int:
        # numpy uses the exact multiplication method for small lambda
        return int(self.rng.poisson(1.0))


class ConstantSampler:
    """Always returns `value`; value=1 turns the ensemble into M plain ISGD runs."""

    def __init__(self, value: int = 1) -> None:
        if value < 0:
            raise ConfigError(f"sampler value must be >= 0, got {value}")
        self.value = value

    def draw(self) -> int:
        return self.value


def poisson1_draw(sampler: Sampler) -> int:
    return sampler.draw()


SamplerFactory = Callable[[int, np.random.SeedSequence], Sampler]


def _default_sampler(ordinal: int, seed: np.random.SeedSequence) -> Sampler:
    return PoissonSampler(seed)


def _scores_if_known(node: IsgdModel, u_idx: int, n_items: int) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    if not node.users.has_row(u_idx):
        return None
    return node.node_scores(u_idx, n_items)


class BaggedModel:
    """
    M ISGD nodes trained on Poisson(1)-resampled events.

    External identifiers are interned once for the whole ensemble; factor
    rows stay per node. Node j (0-based) draws its initialization and its
    bootstrap counts from two child streams of the master seed, so results
    do not depend on `threads`.

    aggregation="zero": nodes lacking A_u or B_i contribute 0 and the
    denominator is M. aggregation="skip": average over holding nodes only.

    Use as a context manager (or call close()) when threads > 1 so the
    scoring pool is released.
    """

    def __init__(
        self,
        hp: Optional[Hyperparameters] = None,
        m: int = 64,
        *,
        seed: int = 42,
        threads: int = 1,
        aggregation: Aggregation = "zero",
        sampler_factory: Optional[SamplerFactory] = None,
        simultaneous: bool = False,
    ) -> None:
        if m < 1:
            raise ConfigError(f"node count must be >= 1, got {m}")
        if threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}")
        if aggregation not in ("zero", "skip"):
            raise ConfigError(f"aggregation must be 'zero' or 'skip', got {aggregation!r}")
        self.hp = hp or Hyperparameters()
        self.m = m
        self.threads = threads
        self.aggregation: Aggregation = aggregation
        self.user_index = IdIndex()
        self.item_index = IdIndex()
        self.nodes: List[IsgdModel] = [
            IsgdModel(
                self.hp,
                seed=node_seed(seed, j, INIT_STREAM),
                user_index=self.user_index,
                item_index=self.item_index,
                simultaneous=simultaneous,
            )
            for j in range(m)
        ]
        factory = sampler_factory or _default_sampler
        self.samplers: List[Sampler] = [factory(j, node_seed(seed, j, SAMPLER_STREAM)) for j in range(m)]
        self.draws = 0
        self._parallel: Optional[Parallel] = None

    # ---------- Lifecycle ----------
    def open(self) -> None:
        if self._parallel is None and self.threads > 1 and self.m > 1:
            self._parallel = Parallel(n_jobs=self.threads, prefer="threads")
            self._parallel.__enter__()

    def close(self) -> None:
        if self._parallel is not None:
            try:
                self._parallel.__exit__(None, None, None)
            finally:
                self._parallel = None

    def __enter__(self) -> "BaggedModel":
        self.open()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    # ---------- Contract ----------
    def knows_user(self, user: str) -> bool:
        return any(node.knows_user(user) for node in self.nodes)

    def knows_item(self, item: str) -> bool:
        return any(node.knows_item(item) for node in self.nodes)

    def update(self, event: InteractionEvent) -> None:
        u_idx = self.user_index.intern(event.user)
        i_idx = self.item_index.intern(event.item)
        for ordinal, (node, sampler) in enumerate(zip(self.nodes, self.samplers), start=1):
            c = sampler.draw()
            if c <= 0:
                continue
            self.draws += c
            try:
                node.train_indices(u_idx, i_idx, repeats=c)
            except ModelDivergenceError as e:
                raise ModelDivergenceError(e.user, e.item, node=ordinal) from e

    def aggregate_score(self, user: str, item: str) -> Optional[float]:
        total = 0.0
        holders = 0
        for node in self.nodes:
            s = node.score(user, item)
            if s is None:
                continue
            total += s
            holders += 1
        if holders == 0:
            return None
        return total / (self.m if self.aggregation == "zero" else holders)

    score = aggregate_score

    def recommend(self, user: str, n: int, exclude: Iterable[str] = ()) -> RankedList:
        u_idx = self.user_index.get(user)
        if u_idx is None or not self.knows_user(user):
            raise UnknownUserError(f"unknown user {user!r}")
        n_items = len(self.item_index)
        total = np.zeros(n_items, dtype=np.float64)
        holders = np.zeros(n_items, dtype=np.int64)
        # fixed summation order 1..M whatever the evaluation order was
        for result in self._per_node_scores(u_idx, n_items):
            if result is None:
                continue
            s, held = result
            total += np.where(held, s, 0.0)
            holders += held
        if self.aggregation == "zero":
            scores = total / self.m
        else:
            scores = np.divide(total, holders, out=np.zeros_like(total), where=holders > 0)
        # only items some node holds a row for
        candidates = (holders > 0) & ~exclusion_mask(self.item_index, exclude, n_items)
        return rank_by_distance_to_one(scores, candidates, n, self.item_index)

    # ---------- Warm-up ----------
    def warm_up(self, events: Sequence[InteractionEvent], mode: WarmupMode = "stream") -> None:
        """
        stream: feed the slice through update() (Poisson-resampled per node).
        copy: train node 1 once per event as plain ISGD, then copy its
        factors into every other node.
        """
        if mode == "stream":
            for event in events:
                self.update(event)
            return
        if mode != "copy":
            raise ConfigError(f"warm-up mode must be 'stream' or 'copy', got {mode!r}")
        first = self.nodes[0]
        for event in events:
            u_idx = self.user_index.intern(event.user)
            i_idx = self.item_index.intern(event.item)
            try:
                first.train_indices(u_idx, i_idx)
            except ModelDivergenceError as e:
                raise ModelDivergenceError(e.user, e.item, node=1) from e
        for node in self.nodes[1:]:
            node.users = first.users.copy()
            node.items = first.items.copy()
        _logger.debug("copied warm-up factors of node 1 into %d nodes", self.m - 1)

    # ---------- Internal ----------
    def _per_node_scores(self, u_idx: int, n_items: int) -> List[Optional[Tuple[np.ndarray, np.ndarray]]]:
        if self.threads > 1 and self.m > 1:
            self.open()
            assert self._parallel is not None
            return list(self._parallel(delayed(_scores_if_known)(node, u_idx, n_items) for node in self.nodes))
        return [_scores_if_known(node, u_idx, n_items) for node in self.nodes]
