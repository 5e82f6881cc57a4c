import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from tsnids.errors import SchemaError
from tsnids.preprocess import apply_normalizer, fit_normalizer

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


class TestFit:
    def test_column_extrema(self):
        m = fit_normalizer(np.array([[0.0], [5.0], [10.0]]))
        assert (m.col_min[0], m.col_max[0]) == (0.0, 10.0)

    def test_single_row(self):
        m = fit_normalizer(np.array([[2.0, -3.0]]))
        np.testing.assert_array_equal(m.col_min, m.col_max)

    def test_two_columns(self):
        m = fit_normalizer(np.array([[1.0, 100.0], [3.0, 200.0]]))
        np.testing.assert_array_equal(m.col_min, [1, 100])
        np.testing.assert_array_equal(m.col_max, [3, 200])

    def test_empty_and_non_finite(self):
        with pytest.raises(ValueError):
            fit_normalizer(np.empty((0, 3)))
        with pytest.raises(ValueError):
            fit_normalizer(np.array([[np.inf]]))


class TestApply:
    col = np.array([[0.0], [5.0], [10.0]])

    def test_standard(self):
        np.testing.assert_array_equal(apply_normalizer(fit_normalizer(self.col), self.col)[:, 0], [0, 0.5, 1])

    def test_paper_literal(self):
        m = fit_normalizer(self.col, "paper-literal")
        np.testing.assert_array_equal(apply_normalizer(m, self.col)[:, 0], [-1, -0.5, 0])

    def test_constant_column(self):
        c = np.full((3, 1), 7.0)
        for mode in ("standard", "paper-literal"):
            np.testing.assert_array_equal(apply_normalizer(fit_normalizer(c, mode), c), 0)

    def test_out_of_range_clamped(self):
        m = fit_normalizer(self.col)
        np.testing.assert_array_equal(apply_normalizer(m, np.array([[-5.0], [20.0]]))[:, 0], [0, 1])

    def test_width_mismatch(self):
        with pytest.raises(SchemaError):
            apply_normalizer(fit_normalizer(self.col), np.ones((2, 2)))


class TestProperties:
    @settings(max_examples=100, deadline=None)
    @given(hnp.arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 5)), elements=finite),
           st.floats(0.1, 10), st.sampled_from(["standard", "paper-literal"]))
    def test_range(self, train, stretch, mode):
        test = train * stretch - 3.0
        lo, hi = (0.0, 1.0) if mode == "standard" else (-1.0, 0.0)
        u = apply_normalizer(fit_normalizer(train, mode), np.vstack([train, test]))
        assert u.min() >= lo and u.max() <= hi

    @settings(max_examples=100, deadline=None)
    @given(hnp.arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 4)), elements=finite, unique=True))
    def test_order_preserved(self, x):
        u = apply_normalizer(fit_normalizer(x), x)
        for j in range(x.shape[1]):
            a, b = np.argsort(x[:, j], kind="stable"), u[:, j]
            assert np.all(np.diff(b[a]) >= 0)

    def test_only_training_statistics(self):
        rng = np.random.default_rng(0)
        train, test = rng.normal(size=(50, 4)), rng.normal(5, 3, size=(50, 4))
        m = fit_normalizer(train)
        apply_normalizer(m, test)
        np.testing.assert_array_equal(m.col_min, train.min(0))
        np.testing.assert_array_equal(m.col_max, train.max(0))
