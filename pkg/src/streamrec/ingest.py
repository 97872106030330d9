"""
Interaction log input.

Format, one event per line, UTF-8, LF or CRLF:

    <user>\t<item>[\t<rating>[\t<timestamp>]]

Lines starting with '#' and blank lines are ignored. Without a rating column
(`has_rating=False`) a third field is read as the timestamp.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .core import InteractionEvent
from .exceptions import ConfigError, DataError, ParseError
from .utils import is_comment

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetSpec:
    path: Union[str, Path, None] = None
    has_rating: bool = False
    rating_scale_min: Optional[float] = None
    rating_scale_max: Optional[float] = None
    keep_top_fraction: float = 0.20
    header: bool = False

    def __post_init__(self) -> None:
        if self.has_rating:
            if self.rating_scale_min is None or self.rating_scale_max is None:
                raise ConfigError("rating datasets need both rating_scale_min and rating_scale_max")
            if not self.rating_scale_min < self.rating_scale_max:
                raise ConfigError(
                    f"rating_scale_min ({self.rating_scale_min}) must be below rating_scale_max ({self.rating_scale_max})"
                )
        if not (0.0 < self.keep_top_fraction <= 1.0):
            raise ConfigError(f"keep_top_fraction must be in (0, 1], got {self.keep_top_fraction}")

    @property
    def threshold(self) -> float:
        """Smallest rating kept as positive feedback (inclusive)."""
        if self.rating_scale_min is None or self.rating_scale_max is None:
            raise ConfigError("dataset has no rating scale")
        span = self.rating_scale_max - self.rating_scale_min
        return self.rating_scale_max - self.keep_top_fraction * span


def _number(text: str, what: str, lineno: Optional[int]) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} is not a number: {text!r}", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} is not finite: {text!r}", lineno)
    return value


def parse_event_line(line: str, spec: DatasetSpec, lineno: Optional[int] = None) -> InteractionEvent:
    fields = [f.strip() for f in line.rstrip("\r\n").split("\t")]
    if len(fields) < 2:
        raise ParseError(f"expected at least 2 tab-separated fields, got {len(fields)}", lineno)
    max_fields = 4 if spec.has_rating else 3
    if len(fields) > max_fields:
        raise ParseError(f"expected at most {max_fields} fields, got {len(fields)}", lineno)
    user, item = fields[0], fields[1]
    if not user or not item:
        raise ParseError("empty user or item identifier", lineno)

    rating: Optional[float] = None
    timestamp: Optional[float] = None
    rest = fields[2:]
    if spec.has_rating and rest:
        rating = _number(rest.pop(0), "rating", lineno)
    if rest:
        timestamp = _number(rest.pop(0), "timestamp", lineno)
    return InteractionEvent(user, item, rating, timestamp)


def format_event_line(event: InteractionEvent) -> str:
    """Inverse of parse_event_line (without the trailing newline)."""
    fields = [event.user, event.item]
    if event.rating is not None:
        fields.append(repr(event.rating))
    if event.timestamp is not None:
        fields.append(repr(event.timestamp))
    return "\t".join(fields)


def iter_lines(lines: Iterable[str], spec: DatasetSpec) -> Iterator[InteractionEvent]:
    """Parse an iterable of raw lines; enforces non-decreasing timestamps."""
    last_ts: Optional[float] = None
    for lineno, line in enumerate(lines, start=1):
        if lineno == 1 and spec.header:
            continue
        if not line.strip() or is_comment(line):
            continue
        event = parse_event_line(line, spec, lineno)
        if event.timestamp is not None:
            if last_ts is not None and event.timestamp < last_ts:
                raise DataError(f"line {lineno}: timestamp {event.timestamp!r} is earlier than {last_ts!r}")
            last_ts = event.timestamp
        yield event


def decode_lines(fh: BinaryIO) -> Iterator[str]:
    """UTF-8 decode raw lines; a bad byte is a ParseError on its line."""
    for lineno, raw in enumerate(fh, start=1):
        try:
            yield raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"invalid UTF-8 at byte {e.start}", lineno) from None


def read_events(spec: DatasetSpec) -> Iterator[InteractionEvent]:
    if spec.path is None:
        raise ConfigError("dataset path is required")
    path = Path(spec.path)
    if not path.exists():
        raise FileNotFoundError(path)
    with path.open("rb") as fh:
        yield from iter_lines(decode_lines(fh), spec)


def load_events(spec: DatasetSpec) -> List[InteractionEvent]:
    events = list(read_events(spec))
    _logger.info("read %d events from %s", len(events), spec.path)
    return events


def threshold_filter(
    events: Iterable[InteractionEvent], spec: DatasetSpec, *, drop_ratings: bool = True
) -> List[InteractionEvent]:
    """
    Keep events rated in the top `keep_top_fraction` of the scale (inclusive).
    Ratings are dropped from the kept events unless drop_ratings=False.
    """
    if not spec.has_rating:
        raise ConfigError("threshold_filter needs a dataset with ratings")
    threshold = spec.threshold
    kept: List[InteractionEvent] = []
    for pos, event in enumerate(events, start=1):
        if event.rating is None:
            raise DataError(f"event {pos} ({event.user!r}, {event.item!r}) has no rating")
        if event.rating >= threshold:
            kept.append(replace(event, rating=None) if drop_ratings else event)
    _logger.info("rating threshold %.4g kept %d events", threshold, len(kept))
    return kept


def split_warmup(events: Sequence[InteractionEvent], fraction: float) -> Tuple[List[InteractionEvent], List[InteractionEvent]]:
    """First floor(fraction * len) events for warm-up, the rest for evaluation."""
    if not (0.0 <= fraction < 1.0):
        raise ConfigError(f"warm-up fraction must be in [0, 1), got {fraction}")
    events = list(events)
    cut = math.floor(fraction * len(events))
    return events[:cut], events[cut:]
