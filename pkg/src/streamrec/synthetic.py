"""
Clustered positive-only streams for desk-scale experiments.

Users and items are split into latent clusters; most events pair a user with
an item of the same cluster, the rest are uniform noise.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Union

import numpy as np

from .core import InteractionEvent
from .exceptions import ConfigError
from .ingest import format_event_line


def generate_clustered_stream(
    n_users: int,
    n_items: int,
    n_events: int,
    *,
    n_clusters: int = 20,
    noise: float = 0.2,
    seed: int = 0,
) -> List[InteractionEvent]:
    if min(n_users, n_items, n_clusters) < 1 or n_events < 0:
        raise ConfigError("users, items and clusters must be >= 1 and events >= 0")
    if n_clusters > n_items:
        raise ConfigError(f"cannot spread {n_items} items over {n_clusters} clusters")
    if not (0.0 <= noise <= 1.0):
        raise ConfigError(f"noise must be in [0, 1], got {noise}")

    rng = np.random.default_rng(seed)
    user_cluster = rng.integers(n_clusters, size=n_users)
    # every cluster gets at least one item
    item_cluster = np.concatenate([np.arange(n_clusters), rng.integers(n_clusters, size=n_items - n_clusters)])
    rng.shuffle(item_cluster)
    members = [np.flatnonzero(item_cluster == c) for c in range(n_clusters)]

    users = rng.integers(n_users, size=n_events)
    is_noise = rng.random(n_events) < noise
    uniform_items = rng.integers(n_items, size=n_events)
    picks = rng.random(n_events)

    events: List[InteractionEvent] = []
    for t in range(n_events):
        u = int(users[t])
        if is_noise[t]:
            i = int(uniform_items[t])
        else:
            pool = members[user_cluster[u]]
            i = int(pool[int(picks[t] * len(pool))])
        events.append(InteractionEvent(f"u{u}", f"i{i}", timestamp=float(t)))
    return events


def write_stream(events: List[InteractionEvent], path: Union[str, Path]) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for event in events:
            fh.write(format_event_line(event) + "\n")
    return out
