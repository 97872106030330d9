"""
Shared domain types for streaming recommenders.

Identifiers coming from the stream are opaque strings. Each model interns
them into dense, contiguous indices (first-seen order) and keeps latent
factors in grow-on-demand matrices keyed by those indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np
from typing_extensions import Protocol, TypeAlias, runtime_checkable

from .exceptions import ConfigError, DataError, MissingRowError, RowExistsError

Rng: TypeAlias = np.random.Generator

# SeedSequence purposes for per-node child streams.
INIT_STREAM = 0
SAMPLER_STREAM = 1


@dataclass(frozen=True)
class InteractionEvent:
    """One positive (user, item) observation, in stream order."""

    user: str
    item: str
    rating: Optional[float] = None
    timestamp: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.user or not self.item:
            raise DataError(f"empty identifier in event ({self.user!r}, {self.item!r})")


@dataclass(frozen=True)
class Hyperparameters:
    """
    ISGD inputs. `lambda_` is the regularization factor, `eta` the learn rate,
    `iter` the number of SGD passes per observation.
    """

    k: int = 8
    iter: int = 1
    lambda_: float = 0.01
    eta: float = 0.05
    init_mean: float = 0.0
    init_stddev: float = 0.1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.iter < 1:
            raise ConfigError(f"iter must be >= 1, got {self.iter}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if not (self.lambda_ >= 0 and math.isfinite(self.lambda_)):
            raise ConfigError(f"lambda must be >= 0, got {self.lambda_}")
        if not self.init_stddev >= 0:
            raise ConfigError(f"init_stddev must be >= 0, got {self.init_stddev}")


class IdIndex:
    """Bijection between external identifiers and dense indices 0..n-1."""

    def __init__(self) -> None:
        self._forward: Dict[str, int] = {}
        self._reverse: List[str] = []

    def intern(self, ext_id: str) -> int:
        idx = self._forward.get(ext_id)
        if idx is None:
            idx = len(self._reverse)
            self._forward[ext_id] = idx
            self._reverse.append(ext_id)
        return idx

    def get(self, ext_id: str) -> Optional[int]:
        return self._forward.get(ext_id)

    def external(self, idx: int) -> str:
        return self._reverse[idx]

    def __contains__(self, ext_id: object) -> bool:
        return ext_id in self._forward

    def __len__(self) -> int:
        return len(self._reverse)

    def __iter__(self) -> Iterator[str]:
        return iter(self._reverse)


def intern(index: IdIndex, ext_id: str) -> int:
    return index.intern(ext_id)


class FactorMatrix:
    """
    Latent factor rows keyed by dense index.

    Rows live in one contiguous array that doubles its capacity on demand;
    a presence mask tells initialized rows from padding. Rows are never
    removed.
    """

    def __init__(self, k: int, *, init_mean: float = 0.0, init_stddev: float = 0.1, capacity: int = 64):
        if k < 1:
            raise ConfigError(f"k must be >= 1, got {k}")
        self.k = k
        self.init_mean = init_mean
        self.init_stddev = init_stddev
        self._data = np.zeros((max(1, capacity), k), dtype=np.float64)
        self._present = np.zeros(max(1, capacity), dtype=bool)
        self._extent = 0
        self._n_rows = 0

    @property
    def n_rows(self) -> int:
        return self._n_rows

    @property
    def extent(self) -> int:
        """One past the highest initialized index."""
        return self._extent

    def has_row(self, idx: int) -> bool:
        return 0 <= idx < self._extent and bool(self._present[idx])

    def row(self, idx: int) -> np.ndarray:
        """Writable view of row `idx`."""
        if not self.has_row(idx):
            raise MissingRowError(f"no factor row at index {idx}")
        return self._data[idx]

    def init_row(self, idx: int, rng: Rng) -> None:
        if self.has_row(idx):
            raise RowExistsError(f"factor row {idx} already initialized")
        self._reserve(idx + 1)
        self._data[idx] = rng.normal(self.init_mean, self.init_stddev, size=self.k)
        self._present[idx] = True
        self._extent = max(self._extent, idx + 1)
        self._n_rows += 1

    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """(rows, mask) views over indices 0..extent-1."""
        return self._data[: self._extent], self._present[: self._extent]

    def rows(self) -> Iterator[Tuple[int, np.ndarray]]:
        for idx in np.flatnonzero(self._present[: self._extent]):
            yield int(idx), self._data[idx]

    def copy(self) -> "FactorMatrix":
        out = FactorMatrix(self.k, init_mean=self.init_mean, init_stddev=self.init_stddev,
                           capacity=len(self._present))
        out._data[:] = self._data
        out._present[:] = self._present
        out._extent = self._extent
        out._n_rows = self._n_rows
        return out

    def _reserve(self, size: int) -> None:
        cap = len(self._present)
        if size <= cap:
            return
        while cap < size:
            cap *= 2
        data = np.zeros((cap, self.k), dtype=np.float64)
        data[: len(self._data)] = self._data
        present = np.zeros(cap, dtype=bool)
        present[: len(self._present)] = self._present
        self._data, self._present = data, present


def init_row(matrix: FactorMatrix, idx: int, rng: Rng) -> None:
    matrix.init_row(idx, rng)


def node_seed(master_seed: int, ordinal: int, purpose: int) -> np.random.SeedSequence:
    """Child stream for node `ordinal` (0-based); purpose 0 = init, 1 = sampler."""
    return np.random.SeedSequence(master_seed, spawn_key=(ordinal, purpose))


@dataclass(frozen=True)
class RankedList:
    """Recommended (item, score) pairs, best first."""

    entries: Tuple[Tuple[str, float], ...] = ()

    @property
    def items(self) -> List[str]:
        return [item for item, _ in self.entries]

    def rank_of(self, item: str) -> Optional[int]:
        """1-based position of `item`, or None."""
        for pos, (candidate, _) in enumerate(self.entries, start=1):
            if candidate == item:
                return pos
        return None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return iter(self.entries)


def exclusion_mask(index: IdIndex, exclude: Iterable[str], size: int) -> np.ndarray:
    """Boolean mask over 0..size-1 with excluded known items set."""
    mask = np.zeros(size, dtype=bool)
    for ext_id in exclude:
        idx = index.get(ext_id)
        if idx is not None and idx < size:
            mask[idx] = True
    return mask


def rank_by_distance_to_one(scores: np.ndarray, candidates: np.ndarray, n: int, index: IdIndex) -> RankedList:
    """
    Order candidates by |1 - score| ascending; ties keep ascending dense index
    (stable sort over index-ordered candidates).
    """
    if n <= 0:
        return RankedList()
    cand = np.flatnonzero(candidates)
    if cand.size == 0:
        return RankedList()
    key = np.abs(1.0 - scores[cand])
    chosen = cand[np.argsort(key, kind="stable")[:n]]
    return RankedList(tuple((index.external(int(j)), float(scores[j])) for j in chosen))


@runtime_checkable
class Recommender(Protocol):
    """Contract shared by the single model and the ensemble."""

    def update(self, event: InteractionEvent) -> None: ...

    def score(self, user: str, item: str) -> Optional[float]: ...

    def recommend(self, user: str, n: int, exclude: Iterable[str] = ...) -> RankedList: ...

    def knows_user(self, user: str) -> bool: ...

    def knows_item(self, item: str) -> bool: ...
