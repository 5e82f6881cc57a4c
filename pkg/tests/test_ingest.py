import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnids.errors import IngestError, SchemaError
from tsnids.ingest import (
    RawTable,
    decode_column,
    encode_column,
    encode_features,
    encode_non_numeric,
    impute_non_finite,
    load_dataset,
    merge_tables,
    parse_csv_text,
    read_csv,
    repair_label,
    repair_labels,
    write_normalized_csv,
)


def table(n, header=("a", "b", "Label"), start=0, source="t"):
    return RawTable(header, [[str(start + i), str(2 * (start + i)), "BENIGN"] for i in range(n)], source)


class TestReadCsv:
    def test_header_trimmed(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text(" Flow Duration, Label\n3,BENIGN\n")
        t = read_csv(p)
        assert t.header == ("Flow Duration", "Label")
        assert t.rows == [["3", "BENIGN"]]

    def test_empty_file(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_bytes(b"")
        with pytest.raises(IngestError, match="empty input"):
            read_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestError, match="no such file"):
            read_csv(tmp_path / "nope.csv")

    def test_ragged_row_is_named(self, tmp_path):
        lines = ["a,b,Label"] + [f"{i},{i},BENIGN" for i in range(1, 11)]
        lines[7] = "7,BENIGN"
        p = tmp_path / "f.csv"
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(IngestError, match=r"row 7 \(line 8\)"):
            read_csv(p)

    def test_duplicate_header_rejected_unless_deduped(self):
        text = "a, a,Label\n1,2,BENIGN\n"
        with pytest.raises(IngestError, match="duplicate"):
            parse_csv_text(text)
        assert parse_csv_text(text, dedupe_headers=True).header == ("a", "a.1", "Label")

    def test_invalid_utf8_becomes_replacement_char(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_bytes(b"a,Label\n1,Web Attack \x96 XSS\n")
        assert "�" in read_csv(p).rows[0][1]


class TestRepair:
    def test_clean_label_fixed_point(self):
        assert repair_label("BENIGN") == ("BENIGN", False)

    def test_whitespace(self):
        assert repair_label("  DDoS ")[0] == "DDoS"

    def test_replacement_sequence_from_file(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_bytes(b"a,Label\n1,Web Attack \xef\xbf\xbd Brute Force\n2,BENIGN\n")
        t = repair_labels(read_csv(p))
        assert [r[1] for r in t.rows] == ["Web Attack - Brute Force", "BENIGN"]
        assert t.rows_repaired == 1

    def test_missing_label_column(self):
        with pytest.raises(SchemaError, match="Label"):
            repair_labels(RawTable(("a",), [["1"]]))


class TestMerge:
    def test_concatenates(self):
        m = merge_tables([table(3), table(2, start=3)])
        assert len(m.rows) == 5
        assert [r[0] for r in m.rows] == ["0", "1", "2", "3", "4"]

    def test_identity(self):
        t = table(3)
        m = merge_tables([t])
        assert m.header == t.header and m.rows == t.rows

    def test_renamed_column(self):
        other = table(2, header=("a", "c", "Label"), source="u")
        with pytest.raises(SchemaError, match=r"missing \['b'\]; unexpected \['c'\]"):
            merge_tables([table(2), other])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 5))
    def test_associative(self, na, nb, nc):
        a, b, c = table(na), table(nb, start=10), table(nc, start=20)
        assert merge_tables([merge_tables([a, b]), c]).rows == merge_tables([a, b, c]).rows


class TestEncode:
    def test_first_appearance_codes(self):
        codes, mapping = encode_column(["tcp", "udp", "tcp"])
        np.testing.assert_array_equal(codes, [0, 1, 0])
        assert mapping == {"tcp": 0, "udp": 1}

    def test_infinity_imputed_to_zero(self):
        t = RawTable(("x", "Label"), [["1.5", "BENIGN"], ["Infinity", "DDoS"], ["2.5", "BENIGN"]])
        fm, labels, schema, report = encode_non_numeric(t)
        np.testing.assert_array_equal(fm.values[:, 0], [1.5, 0.0, 2.5])
        assert report.cells_imputed == 1
        np.testing.assert_array_equal(labels.binary, [0, 1, 0])

    def test_numeric_table_has_no_feature_maps(self):
        t = RawTable(("x", "y", "Label"), [["1", "2", "BENIGN"], ["3", "4", "DoS"]])
        _, _, schema, _ = encode_non_numeric(t)
        assert set(schema.categorical_maps) <= {"Label"}
        assert schema.feature_names == ("x", "y")

    def test_categorical_round_trip(self):
        cells = ["tcp", "udp", "icmp", "udp", "tcp"]
        t = RawTable(("Protocol", "Label"), [[c, "BENIGN"] for c in cells])
        fm, _, schema, _ = encode_non_numeric(t)
        assert decode_column(fm.values[:, 0], schema.categorical_maps["Protocol"]) == cells

    def test_impute_modes(self):
        v = np.array([[1.0, np.inf], [3.0, 4.0], [np.nan, 8.0]])
        med, n, _ = impute_non_finite(v, "median")
        np.testing.assert_array_equal(med, [[1.0, 6.0], [3.0, 4.0], [2.0, 8.0]])
        assert n == 2
        kept, n, keep = impute_non_finite(v, "drop")
        np.testing.assert_array_equal(kept, [[3.0, 4.0]])
        np.testing.assert_array_equal(keep, [False, True, False])

    def test_output_is_finite(self, defect_result):
        t = parse_csv_text(defect_result.csv_bytes.decode())
        t = repair_labels(t)
        fm, *_ = encode_non_numeric(t)
        assert np.isfinite(fm.values).all()

    def test_feature_count_from_header(self):
        t = RawTable(tuple(f"c{j}" for j in range(7)) + ("Label",), [[str(j) for j in range(7)] + ["BENIGN"]])
        _, _, schema, report = encode_non_numeric(t)
        assert schema.n_features == 7 and report.n_features == 7


class TestPredictionEncoding:
    def test_missing_column_named(self):
        _, _, schema, _ = encode_non_numeric(table(3))
        with pytest.raises(SchemaError, match="'b'"):
            encode_features(RawTable(("a", "Label"), [["1", "BENIGN"]]), schema)

    def test_reuses_categorical_map(self):
        t = RawTable(("Protocol", "Label"), [["tcp", "BENIGN"], ["udp", "DoS"]])
        _, _, schema, _ = encode_non_numeric(t)
        vals, _ = encode_features(RawTable(("Protocol",), [["udp"], ["gre"], ["tcp"]]), schema)
        np.testing.assert_array_equal(vals[:, 0], [1, 2, 0])


class TestLoadDataset:
    def test_multi_file_and_export(self, tmp_path):
        paths = []
        for k in range(3):
            p = tmp_path / f"f{k}.csv"
            p.write_text("x, Proto ,Label\n" + "".join(f"{k + i},tcp,{'BENIGN' if i % 2 else 'DoS'}\n" for i in range(4)))
            paths.append(p)
        ds = load_dataset(paths)
        assert ds.features.rows == 12 and ds.report.files_read == 3
        assert ds.report.classes == {"BENIGN": 6, "DoS": 6}
        out = tmp_path / "norm.csv"
        write_normalized_csv(out, ds)
        again = load_dataset(out)
        np.testing.assert_array_equal(again.features.values, ds.features.values)
        assert again.labels.raw_names == ds.labels.raw_names
