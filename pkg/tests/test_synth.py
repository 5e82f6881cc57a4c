import numpy as np
import pytest

from tsnids.preprocess import apply_normalizer, fit_normalizer
from tsnids.synth import ClassSpec, SynthSpec, generate, separable_two_class, split_rows, to_dataset


class TestGenerate:
    def test_class_balance(self):
        r = generate(SynthSpec(n_rows=1000, n_features=10, seed=3))
        counts = r.defects["class_counts"]
        assert all(abs(c - 500) <= 25 for c in counts.values())

    def test_clean_needs_no_repair(self):
        ds = to_dataset(generate(SynthSpec(n_rows=300, n_features=10, seed=1)))
        assert ds.report.rows_repaired == 0 and ds.report.cells_imputed == 0

    def test_defects_round_trip(self, defect_result):
        ds = to_dataset(defect_result)
        d = defect_result.defects
        assert ds.report.cells_imputed == d["cells_non_finite"] == 40
        assert ds.report.rows_repaired == d["mojibake_rows"] > 0
        assert set(ds.labels.classes) == {"BENIGN", "Web Attack - Brute Force"}
        assert ds.schema.feature_names[0] == "Feature 00"

    def test_byte_identical(self):
        spec = separable_two_class(n_rows=200, seed=8, defects=True)
        assert generate(spec).csv_bytes == generate(spec).csv_bytes
        assert generate(spec).csv_bytes != generate(separable_two_class(n_rows=200, seed=9, defects=True)).csv_bytes

    def test_normalized_range(self, defect_result):
        x = to_dataset(defect_result).features.values
        u = apply_normalizer(fit_normalizer(x), x)
        assert u.min() >= 0 and u.max() <= 1

    def test_categorical_column(self):
        ds = to_dataset(generate(SynthSpec(n_rows=50, n_features=3, categorical_column=True, seed=0)))
        assert "Protocol" in ds.schema.categorical_maps

    def test_split_rows(self):
        r = generate(SynthSpec(n_rows=101, n_features=3, seed=0))
        parts = split_rows(r, 3)
        assert sum(p.count(b"\n") - 1 for p in parts) == 101

    @pytest.mark.parametrize("kw", [dict(n_features=1), dict(classes=(ClassSpec("a", 0.0),)),
                                    dict(mojibake=True), dict(n_rows=2, n_features=2, inf_cells=5)])
    def test_invalid_spec(self, kw):
        with pytest.raises(ValueError):
            SynthSpec(**kw)

    def test_features_match_csv(self):
        r = generate(SynthSpec(n_rows=20, n_features=4, seed=2))
        np.testing.assert_allclose(to_dataset(r).features.values, r.features, rtol=1e-15)
