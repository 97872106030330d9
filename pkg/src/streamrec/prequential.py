"""
Prequential (test-then-train) evaluation of streaming recommenders.

For every event (u, i) in stream order:

  1. if u is known, ask the current model for a top-N list for u, excluding
     the items u has already co-occurred with; otherwise go to 3;
  2. score the list against i (Recall@C for every cutoff C);
  3. update the model with (u, i);
  4. move on to the next event.

Repeated (u, i) pairs are not scored (the observed item is necessarily
excluded from the list) but still update the model.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .core import InteractionEvent, RankedList, Recommender
from .exceptions import ConfigError, EvaluationAborted, ModelDivergenceError
from .types import StepStatus, SummaryRow, WarmupMode
from .utils import seconds_to_ms

_logger = logging.getLogger(__name__)

EventCallback = Callable[[Any], None]
Clock = Callable[[], float]

DEFAULT_CUTOFFS: Tuple[int, ...] = (1, 5, 10, 20)


@dataclass(frozen=True)
class EvalConfig:
    cutoffs: Tuple[int, ...] = DEFAULT_CUTOFFS
    list_size: int = 20
    moving_avg_window: int = 10_000
    warmup_fraction: float = 0.10
    update_during_eval: bool = True
    progress_every: int = 10_000

    def __post_init__(self) -> None:
        cutoffs = tuple(int(c) for c in self.cutoffs)
        object.__setattr__(self, "cutoffs", cutoffs)
        if not cutoffs:
            raise ConfigError("at least one cutoff is required")
        if cutoffs[0] < 1 or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
            raise ConfigError(f"cutoffs must be positive and strictly ascending, got {list(cutoffs)}")
        if self.list_size < 1:
            raise ConfigError(f"list_size must be >= 1, got {self.list_size}")
        if cutoffs[-1] > self.list_size:
            raise ConfigError(f"largest cutoff {cutoffs[-1]} exceeds list_size {self.list_size}")
        if self.moving_avg_window < 1:
            raise ConfigError(f"moving-average window must be >= 1, got {self.moving_avg_window}")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ConfigError(f"warmup_fraction must be in [0, 1), got {self.warmup_fraction}")


class SeenSets:
    """Items each user has co-occurred with so far. Sets only grow."""

    def __init__(self) -> None:
        self._by_user: Dict[str, Set[str]] = {}

    def add(self, user: str, item: str) -> None:
        self._by_user.setdefault(user, set()).add(item)

    def seen(self, user: str) -> Set[str]:
        return self._by_user.get(user, set())

    def contains(self, user: str, item: str) -> bool:
        items = self._by_user.get(user)
        return items is not None and item in items

    def __len__(self) -> int:
        return len(self._by_user)


@dataclass(frozen=True)
class StepRecord:
    """
    Outcome of one evaluation step. Times are seconds; `recall` is set iff
    the step was scored, `rec_time` iff a list was produced, `update_time`
    iff the model was updated.
    """

    position: int
    user: str
    item: str
    status: StepStatus
    recall: Optional[Dict[int, int]] = None
    update_time: Optional[float] = None
    rec_time: Optional[float] = None
    rank: Optional[int] = field(default=None, compare=False)


def score_step(ranked: RankedList, observed: str, cutoffs: Sequence[int]) -> Dict[int, int]:
    rank = ranked.rank_of(observed)
    return {c: int(rank is not None and rank <= c) for c in cutoffs}


def warm_up(
    model: Recommender,
    events: Iterable[InteractionEvent],
    seen: SeenSets,
    *,
    mode: WarmupMode = "stream",
) -> int:
    """Train on `events` without scoring; their pairs join the seen sets."""
    events = list(events)
    ensemble_warm_up = getattr(model, "warm_up", None)
    if callable(ensemble_warm_up):
        ensemble_warm_up(events, mode)
    else:
        for event in events:
            model.update(event)
    for event in events:
        seen.add(event.user, event.item)
    _logger.info("warm-up trained on %d events", len(events))
    return len(events)


class PrequentialEvaluator:
    """
    Runs the test-then-train loop over a stream.

    Subscribe with .on(event, callback):
      - "step":     (record: StepRecord) -> None
      - "progress": (steps_done: int) -> None, every cfg.progress_every steps
      - "error":    (exc: Exception) -> None, for failures inside callbacks

    Usage:
        records = (PrequentialEvaluator(model, EvalConfig(), seen)
                   .on("progress", lambda n: print(n, "steps"))
                   .run(events))
    """

    def __init__(
        self,
        model: Recommender,
        cfg: Optional[EvalConfig] = None,
        seen: Optional[SeenSets] = None,
        *,
        clock: Clock = time.perf_counter,
    ) -> None:
        self.model = model
        self.cfg = cfg or EvalConfig()
        self.seen = seen if seen is not None else SeenSets()
        self._clock = clock
        self._events: Dict[str, EventCallback] = {}

    # ---------------- Event API ----------------
    def on(self, event: str, callback: EventCallback) -> "PrequentialEvaluator":
        """Register a callback for an event; chainable."""
        self._events[event] = callback
        return self

    def off(self, event: str) -> "PrequentialEvaluator":
        """Unregister a callback; chainable."""
        self._events.pop(event, None)
        return self

    def _emit(self, event: str, payload: Any) -> None:
        cb = self._events.get(event)
        if not cb:
            return
        try:
            cb(payload)
        except Exception as e:  # a callback must never stop the evaluation
            err = self._events.get("error")
            if err and event != "error":
                try:
                    err(e)
                except Exception:
                    pass
            else:
                _logger.warning("%s callback failed: %s", event, e)

    # ---------------- Loop ----------------
    def run(self, stream: Iterable[InteractionEvent]) -> List[StepRecord]:
        cfg, model, seen, clock = self.cfg, self.model, self.seen, self._clock
        records: List[StepRecord] = []
        for position, event in enumerate(stream, start=1):
            user, item = event.user, event.item
            recall: Optional[Dict[int, int]] = None
            rec_time: Optional[float] = None
            rank: Optional[int] = None

            if not model.knows_user(user):
                status: StepStatus = "skipped_unknown_user"
            elif seen.contains(user, item):
                status = "skipped_repeat"
            else:
                t0 = clock()
                ranked = model.recommend(user, cfg.list_size, seen.seen(user))
                rec_time = clock() - t0
                recall = score_step(ranked, item, cfg.cutoffs)
                rank = ranked.rank_of(item)
                status = "scored"

            update_time: Optional[float] = None
            if cfg.update_during_eval:
                t0 = clock()
                try:
                    model.update(event)
                except ModelDivergenceError as e:
                    _logger.error("aborting at step %d: %s", position, e)
                    raise EvaluationAborted(f"step {position}: {e}", records) from e
                update_time = clock() - t0
            seen.add(user, item)

            record = StepRecord(position, user, item, status, recall, update_time, rec_time, rank)
            records.append(record)
            self._emit("step", record)
            if cfg.progress_every and position % cfg.progress_every == 0:
                self._emit("progress", position)
        return records


def run(
    stream: Iterable[InteractionEvent],
    model: Recommender,
    cfg: Optional[EvalConfig] = None,
    seen: Optional[SeenSets] = None,
) -> List[StepRecord]:
    """One-liner: evaluate `model` over `stream` (warm-up already consumed)."""
    return PrequentialEvaluator(model, cfg, seen).run(stream)


def _mean(values: List[float]) -> Optional[float]:
    if not values:
        return None
    return math.fsum(values) / len(values)


def summarize(
    records: Sequence[StepRecord],
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    *,
    model: str = "",
    nodes: Optional[int] = None,
) -> SummaryRow:
    """
    Mean Recall@C over scored steps, mean update time over updated steps,
    mean recommendation time over steps that produced a list (ms).
    """
    scored = [r for r in records if r.status == "scored"]
    recall: Dict[int, Optional[float]] = {
        c: _mean([float(r.recall[c]) for r in scored if r.recall is not None]) for c in cutoffs
    }
    update_times = [r.update_time for r in records if r.update_time is not None]
    rec_times = [r.rec_time for r in records if r.rec_time is not None]
    return SummaryRow(
        model=model,
        nodes=nodes,
        n_steps=len(records),
        n_scored=len(scored),
        n_skipped_unknown_user=sum(1 for r in records if r.status == "skipped_unknown_user"),
        n_skipped_repeat=sum(1 for r in records if r.status == "skipped_repeat"),
        recall=recall,
        update_ms=seconds_to_ms(_mean(update_times)),
        rec_ms=seconds_to_ms(_mean(rec_times)),
    )


def moving_average(series: Sequence[float], n: int) -> np.ndarray:
    """
    Accumulated mean for the first n points, then the mean of the last n.
    """
    if n < 1:
        raise ConfigError(f"window must be >= 1, got {n}")
    values = np.asarray(series, dtype=np.float64)
    if values.size == 0:
        return values
    csum = np.cumsum(values)
    out = np.empty_like(values)
    head = min(n, values.size)
    out[:head] = csum[:head] / np.arange(1, head + 1)
    if values.size > n:
        out[n:] = (csum[n:] - csum[:-n]) / n
    return out


def recall_series(records: Sequence[StepRecord], cutoff: int) -> np.ndarray:
    """Per-step Recall@cutoff over scored steps only."""
    return np.array(
        [r.recall[cutoff] for r in records if r.status == "scored" and r.recall is not None],
        dtype=np.float64,
    )


def timing_series(records: Sequence[StepRecord], attr: str) -> np.ndarray:
    """Per-step `update_time` or `rec_time` in ms, over the steps that have one."""
    return np.array(
        [getattr(r, attr) * 1000.0 for r in records if getattr(r, attr) is not None],
        dtype=np.float64,
    )
