from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_cart, small_forest_fixtures, two_gaussians
from tsnids.errors import SchemaError, TrainingError
from tsnids.forest import ForestConfig, ForestModel, Tree, forest_votes, gini, predict_forest, train_forest

SINGLE = dict(n_trees=1, bootstrap=False)


def single_tree(x, y, k):
    return train_forest(x, y, ForestConfig(feature_subset_size=x.shape[1], **SINGLE), k)


def leaf(cls, n_classes=2):
    counts = np.zeros((1, n_classes), dtype=np.int64)
    counts[0, cls] = 1
    return Tree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]), counts)


def same_forest(a, b):
    assert len(a.trees) == len(b.trees)
    for s, t in zip(a.trees, b.trees):
        for name in ("feature", "threshold", "left", "right", "counts"):
            np.testing.assert_array_equal(getattr(s, name), getattr(t, name))


class TestGini:
    def test_examples(self):
        assert gini([10, 0]) == 0.0
        assert gini([5, 5]) == 0.5
        assert gini([1, 2, 3]) == pytest.approx(float(Fraction(11, 18)), abs=1e-15)

    def test_empty(self):
        with pytest.raises(ValueError):
            gini([0, 0])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(0, 50), min_size=2, max_size=6).filter(lambda c: sum(c) > 0))
    def test_bounds(self, counts):
        g = gini(counts)
        k = len(counts)
        assert -1e-15 <= g <= 1 - 1 / k + 1e-12
        assert (g == 0) == (np.count_nonzero(counts) == 1)


class TestSingleTree:
    def test_pure_root(self):
        x = np.random.default_rng(0).normal(size=(20, 3))
        model = train_forest(x, np.full(20, 1), ForestConfig(n_trees=5, seed=1), 2)
        assert all(t.n_nodes == 1 for t in model.trees)
        np.testing.assert_array_equal(predict_forest(model, x), 1)

    def test_oracle_on_fixture_suite(self):
        probe = np.random.default_rng(7)
        for x, y, k in small_forest_fixtures():
            tree = single_tree(x, y, k).trees[0]
            ref = oracle_cart(x.tolist(), y.tolist(), k)
            queries = np.vstack([x, probe.normal(size=(20, x.shape[1])), x + 1e-9])
            np.testing.assert_array_equal(tree.predict(queries), [ref(r) for r in queries.tolist()])

    def test_consistent_data_fits_perfectly(self):
        gen = np.random.default_rng(3)
        for _ in range(20):
            x = gen.normal(size=(40, 3))
            y = gen.integers(0, 2, 40)
            np.testing.assert_array_equal(single_tree(x, y, 2).trees[0].predict(x), y)

    def test_depth_limit(self):
        x, y = two_gaussians(50, 2, 1.0, seed=0)
        m = train_forest(x, y, ForestConfig(max_depth=2, n_trees=3, seed=0))
        assert max(t.depth for t in m.trees) <= 2

    def test_strict_gini_decrease(self):
        x, y = two_gaussians(100, 5, 1.0, seed=2)
        for t in train_forest(x, y, ForestConfig(n_trees=10, seed=3)).trees:
            for i in np.flatnonzero(t.feature >= 0):
                c, l, r = (t.counts[j].astype(float) for j in (i, t.left[i], t.right[i]))
                child = (l.sum() * gini(l) + r.sum() * gini(r)) / c.sum()
                assert child < gini(c)


class TestForest:
    def test_gaussian_clusters(self):
        x, y = two_gaussians(500, 5, 3.0, seed=0)
        order = np.random.default_rng(1).permutation(1000)
        tr, te = order[:500], order[500:]
        model = train_forest(x[tr], y[tr], ForestConfig(n_trees=30, seed=0))
        assert np.mean(predict_forest(model, x[te]) == y[te]) >= 0.95

    def test_votes(self):
        x = np.zeros((1, 1))
        three = ForestModel([leaf(0), leaf(0), leaf(1)], 2, 1, 1)
        two = ForestModel([leaf(0), leaf(1)], 2, 1, 1)
        np.testing.assert_array_equal(forest_votes(three, x), [[2, 1]])
        assert predict_forest(three, x)[0] == 0
        assert predict_forest(two, x)[0] == 0
        assert predict_forest(ForestModel([leaf(1, 3)], 3, 1, 1), np.zeros((4, 1))).tolist() == [1] * 4

    def test_deterministic(self):
        x, y = two_gaussians(60, 4, 1.0, seed=5)
        same_forest(train_forest(x, y, ForestConfig(n_trees=8, seed=9)),
                    train_forest(x, y, ForestConfig(n_trees=8, seed=9)))

    def test_row_order_irrelevant(self):
        x, y = two_gaussians(60, 4, 1.0, seed=5)
        perm = np.random.default_rng(0).permutation(120)
        same_forest(train_forest(x, y, ForestConfig(n_trees=8, seed=9)),
                    train_forest(x[perm], y[perm], ForestConfig(n_trees=8, seed=9)))

    def test_errors(self):
        with pytest.raises(TrainingError):
            train_forest(np.empty((0, 2)), np.empty(0, dtype=int))
        model = train_forest(np.eye(3), [0, 1, 0], ForestConfig(n_trees=1))
        with pytest.raises(SchemaError):
            predict_forest(model, np.ones((2, 4)))
