import numpy as np
import pytest

from streamrec.core import (
    FactorMatrix,
    Hyperparameters,
    IdIndex,
    InteractionEvent,
    RankedList,
    exclusion_mask,
    init_row,
    intern,
    node_seed,
    rank_by_distance_to_one,
)
from streamrec.exceptions import ConfigError, DataError, MissingRowError, RowExistsError


def test_intern_assigns_contiguous_first_seen_indices():
    index = IdIndex()
    assert intern(index, "u1") == 0
    assert intern(index, "u2") == 1
    assert intern(index, "u1") == 0
    assert len(index) == 2
    assert intern(index, "u3") == 2


def test_intern_forward_and_reverse_are_inverse():
    index = IdIndex()
    ids = ["b", "a", "c", "a", "b", "z"]
    for x in ids:
        assert index.external(index.intern(x)) == x
    for idx, x in enumerate(index):
        assert index.get(x) == idx
    assert index.get("missing") is None
    assert "missing" not in index


def test_init_row_shape_and_duplicate_guard():
    m = FactorMatrix(8)
    rng = np.random.default_rng(1)
    init_row(m, 0, rng)
    assert m.row(0).shape == (8,)
    with pytest.raises(RowExistsError):
        init_row(m, 0, rng)


def test_init_row_consumes_exactly_k_normal_draws():
    m = FactorMatrix(5)
    rng = np.random.default_rng(3)
    reference = np.random.default_rng(3)
    m.init_row(0, rng)
    expected = reference.normal(0.0, 0.1, size=5)
    assert np.array_equal(m.row(0), expected)
    # both generators are now at the same position
    assert rng.random() == reference.random()


def test_init_row_is_deterministic_for_a_seed():
    a, b = FactorMatrix(8), FactorMatrix(8)
    a.init_row(3, np.random.default_rng(node_seed(42, 0, 0)))
    b.init_row(3, np.random.default_rng(node_seed(42, 0, 0)))
    assert np.array_equal(a.row(3), b.row(3))


def test_init_row_distribution_is_mean_zero_stddev_point_one():
    m = FactorMatrix(100)
    rng = np.random.default_rng(2024)
    for idx in range(10_000):
        m.init_row(idx, rng)
    values, _ = m.dense()
    assert values.size == 1_000_000
    assert abs(values.mean()) < 0.002
    assert abs(values.std() - 0.1) < 0.002


def test_factor_matrix_grows_and_keeps_rows():
    m = FactorMatrix(4, capacity=2)
    rng = np.random.default_rng(0)
    m.init_row(0, rng)
    first = m.row(0).copy()
    m.init_row(200, rng)
    assert m.has_row(200) and m.has_row(0)
    assert not m.has_row(1) and not m.has_row(5000)
    assert m.extent == 201 and m.n_rows == 2
    assert np.array_equal(m.row(0), first)
    assert all(row.shape == (4,) for _, row in m.rows())
    with pytest.raises(MissingRowError):
        m.row(1)


def test_factor_matrix_copy_is_independent():
    m = FactorMatrix(2)
    m.init_row(0, np.random.default_rng(0))
    c = m.copy()
    c.row(0)[:] = 5.0
    assert not np.array_equal(m.row(0), c.row(0))
    assert c.n_rows == 1


@pytest.mark.parametrize(
    "kwargs",
    [{"k": 0}, {"iter": 0}, {"eta": 0.0}, {"eta": -1.0}, {"lambda_": -0.1}],
)
def test_hyperparameters_validation(kwargs):
    with pytest.raises(ConfigError):
        Hyperparameters(**kwargs)
    with pytest.raises(ValueError):  # ConfigError is also a ValueError
        Hyperparameters(**kwargs)


def test_event_requires_identifiers():
    with pytest.raises(DataError):
        InteractionEvent("", "i1")
    with pytest.raises(DataError):
        InteractionEvent("u1", "")


def test_rank_by_distance_to_one_orders_and_breaks_ties_by_index():
    index = IdIndex()
    for name in ["i0", "i1", "i2", "i3"]:
        index.intern(name)
    scores = np.array([0.9, 1.1, 0.5, 0.9])
    ranked = rank_by_distance_to_one(scores, np.ones(4, dtype=bool), 3, index)
    # in floating point |1 - 1.1| is a hair above |1 - 0.9|
    assert ranked.items == ["i0", "i3", "i1"]


def test_rank_with_exact_ties_uses_dense_index():
    index = IdIndex()
    for name in ["x", "y", "z"]:
        index.intern(name)
    scores = np.array([0.7, 0.7, 0.7])
    ranked = rank_by_distance_to_one(scores, np.ones(3, dtype=bool), 3, index)
    assert ranked.items == ["x", "y", "z"]


def test_exclusion_mask_ignores_unknown_items():
    index = IdIndex()
    index.intern("a")
    index.intern("b")
    mask = exclusion_mask(index, {"b", "never-seen"}, 2)
    assert mask.tolist() == [False, True]


def test_ranked_list_rank_of():
    ranked = RankedList((("a", 1.0), ("b", 0.9)))
    assert ranked.rank_of("b") == 2
    assert ranked.rank_of("c") is None
    assert ranked.items == ["a", "b"]
