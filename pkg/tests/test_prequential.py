import itertools

import numpy as np
import pytest

from streamrec.bagging import BaggedModel
from streamrec.core import Hyperparameters, InteractionEvent, RankedList
from streamrec.exceptions import ConfigError, EvaluationAborted, ModelDivergenceError
from streamrec.isgd import IsgdModel
from streamrec.prequential import (
    EvalConfig,
    PrequentialEvaluator,
    SeenSets,
    StepRecord,
    moving_average,
    recall_series,
    run,
    score_step,
    summarize,
    warm_up,
)
from streamrec.synthetic import generate_clustered_stream

FIXED = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"]


class StubModel:
    """Knows users once updated; recommends FIXED minus the excluded items."""

    def __init__(self, fail_at=None):
        self.users = set()
        self.updates = 0
        self.excludes = []
        self.fail_at = fail_at

    def update(self, event):
        self.updates += 1
        if self.fail_at is not None and self.updates == self.fail_at:
            raise ModelDivergenceError(event.user, event.item)
        self.users.add(event.user)

    def score(self, user, item):
        return None

    def knows_user(self, user):
        return user in self.users

    def knows_item(self, item):
        return item in FIXED

    def recommend(self, user, n, exclude=()):
        self.excludes.append(set(exclude))
        return RankedList(tuple((x, 1.0) for x in FIXED if x not in exclude)[:n])


def _ev(pairs):
    return [InteractionEvent(u, i) for u, i in pairs]


TRACE = _ev([("u1", "a"), ("u1", "b"), ("u1", "a"), ("u2", "f"), ("u1", "z"), ("u2", "h")])


def _ticking_clock():
    counter = itertools.count()
    return lambda: float(next(counter))


def test_score_step_rank_threshold():
    ranked = RankedList(tuple((f"x{n}", 1.0) for n in range(1, 21)))
    assert score_step(ranked, "x7", [1, 5, 10, 20]) == {1: 0, 5: 0, 10: 1, 20: 1}
    assert score_step(ranked, "x1", [1, 5, 10, 20]) == {1: 1, 5: 1, 10: 1, 20: 1}
    assert score_step(ranked, "nope", [1, 5, 10, 20]) == {1: 0, 5: 0, 10: 0, 20: 0}


def test_hand_traced_protocol():
    model = StubModel()
    records = PrequentialEvaluator(model, EvalConfig(), clock=_ticking_clock()).run(TRACE)
    assert [r.status for r in records] == [
        "skipped_unknown_user",
        "scored",
        "skipped_repeat",
        "skipped_unknown_user",
        "scored",
        "scored",
    ]
    assert [r.recall for r in records] == [
        None,
        {1: 1, 5: 1, 10: 1, 20: 1},  # b is first once a is excluded
        None,
        None,
        {1: 0, 5: 0, 10: 0, 20: 0},  # z never recommended
        {1: 0, 5: 0, 10: 1, 20: 1},  # h is 7th once f is excluded
    ]
    assert [r.position for r in records] == [1, 2, 3, 4, 5, 6]
    # every event updates, including skipped ones
    assert model.updates == 6
    assert model.excludes == [{"a"}, {"a", "b"}, {"f"}]


def test_summary_of_hand_traced_protocol():
    records = PrequentialEvaluator(StubModel(), EvalConfig(), clock=_ticking_clock()).run(TRACE)
    row = summarize(records, (1, 5, 10, 20), model="stub")
    assert row["recall"][1] == pytest.approx(1 / 3)
    assert row["recall"][5] == pytest.approx(1 / 3)
    assert row["recall"][10] == pytest.approx(2 / 3)
    assert row["recall"][20] == pytest.approx(2 / 3)
    assert row["n_steps"] == 6
    assert row["n_scored"] == 3
    assert row["n_skipped_unknown_user"] == 2
    assert row["n_skipped_repeat"] == 1
    # the ticking clock advances one second per reading
    assert row["update_ms"] == pytest.approx(1000.0)
    assert row["rec_ms"] == pytest.approx(1000.0)


def _record(position, status, r20=None):
    recall = None if r20 is None else {20: r20}
    return StepRecord(position, "u", "i", status, recall, 0.001, 0.002 if recall else None)


def test_summarize_means_over_scored_steps_only():
    records = [_record(n, "scored", v) for n, v in enumerate([1, 0, 0, 1], start=1)]
    records.append(_record(5, "skipped_repeat"))
    row = summarize(records, (20,))
    assert row["recall"][20] == 0.5
    assert row["n_steps"] == 5
    assert row["rec_ms"] == pytest.approx(2.0)
    assert row["update_ms"] == pytest.approx(1.0)


def test_summarize_without_scored_steps_reports_absent():
    row = summarize([_record(1, "skipped_unknown_user")], (1, 5))
    assert row["recall"] == {1: None, 5: None}
    assert row["rec_ms"] is None


def test_moving_average_window():
    assert moving_average([1, 0, 1, 1], 2).tolist() == [1.0, 0.5, 0.5, 1.0]


def test_moving_average_long_window_is_cumulative_mean():
    series = [1, 0, 0, 1, 1]
    expected = np.cumsum(series) / np.arange(1, 6)
    assert np.allclose(moving_average(series, 10), expected)


def test_moving_average_constant_series():
    assert moving_average([1.0] * 7, 3).tolist() == [1.0] * 7
    with pytest.raises(ConfigError):
        moving_average([1.0], 0)


def test_unknown_user_event_still_trains():
    model = IsgdModel(Hyperparameters(k=2), seed=0)
    records = run(_ev([("u1", "i1"), ("u1", "i2")]), model)
    assert [r.status for r in records] == ["skipped_unknown_user", "scored"]
    assert model.knows_user("u1")


def test_repeat_after_warm_up_is_skipped():
    model = IsgdModel(Hyperparameters(k=2), seed=0)
    seen = SeenSets()
    warm_up(model, _ev([("u1", "i1")]), seen)
    records = run(_ev([("u1", "i1"), ("u1", "i2"), ("u1", "i2")]), model, seen=seen)
    assert [r.status for r in records] == ["skipped_repeat", "scored", "skipped_repeat"]
    assert seen.seen("u1") == {"i1", "i2"}


def test_unknown_item_is_scored_as_miss():
    model = IsgdModel(Hyperparameters(k=2), seed=0)
    seen = SeenSets()
    warm_up(model, _ev([("u1", "i1")]), seen)
    (record,) = run(_ev([("u1", "brand-new")]), model, seen=seen)
    assert record.status == "scored"
    assert set(record.recall.values()) == {0}


class SpyModel(IsgdModel):
    def recommend(self, user, n, exclude=()):
        ranked = super().recommend(user, n, exclude)
        self.last = (set(exclude), ranked)
        return ranked


def test_protocol_invariants_on_real_model():
    stream = generate_clustered_stream(40, 30, 1500, n_clusters=3, seed=3)
    model = SpyModel(Hyperparameters(k=4), seed=1)
    seen = SeenSets()
    checks = []

    def on_step(record):
        if record.status == "scored":
            exclude, ranked = model.last
            checks.append(record.item not in exclude and not exclude & set(ranked.items))
            r = record.recall
            checks.append(r[1] <= r[5] <= r[10] <= r[20])
            checks.append(set(r.values()) <= {0, 1})

    records = PrequentialEvaluator(model, EvalConfig(), seen).on("step", on_step).run(stream)
    assert checks and all(checks)
    row = summarize(records)
    assert row["n_scored"] + row["n_skipped_unknown_user"] + row["n_skipped_repeat"] == len(stream)
    r = row["recall"]
    assert r[1] <= r[5] <= r[10] <= r[20]
    series = recall_series(records, 20)
    assert moving_average(series, len(series))[-1] == pytest.approx(r[20])


def test_no_update_leaves_model_unchanged():
    stream = generate_clustered_stream(20, 20, 400, n_clusters=2, seed=5)
    model = IsgdModel(Hyperparameters(k=3), seed=2)
    seen = SeenSets()
    warm_up(model, stream[:200], seen)
    users_before = model.users.dense()[0].copy()
    items_before = model.items.dense()[0].copy()
    records = run(stream[200:], model, EvalConfig(update_during_eval=False), seen)
    assert np.array_equal(model.users.dense()[0], users_before)
    assert np.array_equal(model.items.dense()[0], items_before)
    assert all(r.update_time is None for r in records)


def test_divergence_aborts_with_partial_records():
    with pytest.raises(EvaluationAborted) as ei:
        run(TRACE, StubModel(fail_at=3))
    assert len(ei.value.records) == 2
    assert isinstance(ei.value.__cause__, ModelDivergenceError)


def test_callback_errors_are_routed_to_error_handler():
    captured = []

    def bad(_):
        raise RuntimeError("boom")

    evaluator = PrequentialEvaluator(StubModel()).on("step", bad).on("error", captured.append)
    records = evaluator.run(TRACE)
    assert len(records) == 6
    assert len(captured) == 6 and isinstance(captured[0], RuntimeError)


def test_progress_event():
    seen_counts = []
    cfg = EvalConfig(progress_every=2)
    PrequentialEvaluator(StubModel(), cfg).on("progress", seen_counts.append).off("step").run(TRACE)
    assert seen_counts == [2, 4, 6]


def test_warm_up_dispatches_to_ensemble():
    stream = generate_clustered_stream(10, 10, 100, n_clusters=2, seed=0)
    model = BaggedModel(Hyperparameters(k=2), 3, seed=0)
    seen = SeenSets()
    assert warm_up(model, stream, seen, mode="copy") == 100
    assert model.draws == 0  # copy mode does not resample
    assert all(seen.contains(e.user, e.item) for e in stream)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"cutoffs": ()},
        {"cutoffs": (5, 1)},
        {"cutoffs": (1, 1)},
        {"cutoffs": (0, 5)},
        {"cutoffs": (1, 30), "list_size": 20},
        {"warmup_fraction": 1.0},
        {"warmup_fraction": -0.1},
        {"moving_avg_window": 0},
    ],
)
def test_eval_config_validation(kwargs):
    with pytest.raises(ConfigError):
        EvalConfig(**kwargs)
