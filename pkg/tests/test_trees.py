import numpy as np
import pytest

from conftest import tree
from helpers import rand_tree
from oracles import walk_ancestors, walk_depth
from sia.trees import ancestors, depth, tree_stats


def test_ancestors_she(she_eats_apples):
    assert ancestors(she_eats_apples, 1) == {2}


def test_ancestors_root_empty(she_eats_apples):
    assert ancestors(she_eats_apples, 2) == frozenset()


def test_ancestors_chain():
    # a -> b -> c -> d(root)
    t = tree(("a", 2), ("b", 3), ("c", 4), ("d", 0))
    assert ancestors(t, 1) == {2, 3, 4}
    assert depth(t, 1) == 4


def test_depth_root_is_one(she_eats_apples):
    assert depth(she_eats_apples, 2) == 1


def test_depth_she(she_eats_apples):
    assert depth(she_eats_apples, 1) == 2


def test_index_out_of_range(she_eats_apples):
    with pytest.raises(IndexError):
        ancestors(she_eats_apples, 4)
    with pytest.raises(IndexError):
        depth(she_eats_apples, 0)


def test_tree_stats_simple(she_eats_apples):
    stats = tree_stats(she_eats_apples)
    assert stats.depths == (2, 1, 2)
    assert stats.ancestors == (frozenset({2}), frozenset(), frozenset({2}))


def test_tree_stats_single_token():
    t = tree(("hi", 0))
    stats = tree_stats(t)
    assert stats.ancestors == (frozenset(),)
    assert stats.depths == (1,)


def test_tree_stats_forest_roots():
    t = tree(("a", 0), ("b", 0), ("c", 2))
    stats = tree_stats(t)
    assert stats.depths == (1, 1, 2)


def test_tree_stats_matches_naive_oracle_on_random_trees():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        t = rand_tree(rng, int(rng.integers(1, 13)))
        heads = [tok.head for tok in t.tokens]
        stats = tree_stats(t)
        for i in range(1, len(t) + 1):
            assert stats.ancestors[i - 1] == walk_ancestors(heads, i)
            assert stats.depths[i - 1] == walk_depth(heads, i)
            assert ancestors(t, i) == walk_ancestors(heads, i)
            assert depth(t, i) == walk_depth(heads, i)


def test_invariants_depth_vs_ancestors():
    rng = np.random.default_rng(3)
    for _ in range(200):
        t = rand_tree(rng, int(rng.integers(1, 13)))
        stats = tree_stats(t)
        for a, d in zip(stats.ancestors, stats.depths):
            assert d >= 1
            assert len(a) == d - 1
