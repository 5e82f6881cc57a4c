import csv
import io
import json

import numpy as np
import pytest

from tsnids.bundle import load_model
from tsnids.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from tsnids.ingest import encode_features, read_csv
from tsnids.pipeline import ABLATIONS, predict_codes

FAST = ["--stage1-hidden", "12,6", "--stage2-hidden", "12,6", "--pretrain-epochs", "3",
        "--finetune-epochs", "5", "--n-trees", "10", "--seed", "4"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines())


@pytest.fixture
def data(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "-o", tmp_path / "d.csv", "--rows", 400, "--features", 10, "--parts", 2,
                     "--seed", 1)
    assert code == EXIT_OK
    return [tmp_path / "d_0.csv", tmp_path / "d_1.csv"]


class TestIngest:
    def test_merged_row_count(self, data, capsys, tmp_path):
        code, out, _ = run(capsys, "ingest", *data, "--format", "kv", "-o", tmp_path / "n.csv")
        assert code == EXIT_OK
        rep = kv(out)
        assert rep["results.rows_total"] == "400" and rep["results.files_read"] == "2"
        assert rep["version"] and rep["config.seed"] == "0"
        assert len(read_csv(tmp_path / "n.csv").rows) == 400

    def test_header_mismatch(self, data, capsys, tmp_path):
        bad = tmp_path / "bad.csv"
        text = data[1].read_text().replace("Feature 03", "Feature 3x", 1)
        bad.write_text(text)
        code, _, err = run(capsys, "ingest", data[0], bad)
        assert code == EXIT_DATA
        assert "Feature 03" in err and "Feature 3x" in err

    def test_defect_counts(self, capsys, tmp_path):
        run(capsys, "synth", "-o", tmp_path / "x.csv", "--rows", 300, "--features", 8, "--inf-cells", 7,
            "--nan-cells", 4, "--mojibake", "--header-whitespace", "--classes", "BENIGN:1,Web Attack - XSS:1")
        code, out, _ = run(capsys, "ingest", tmp_path / "x.csv", "--format", "json")
        rep = json.loads(out)["results"]
        assert code == EXIT_OK
        assert rep["cells_imputed"] == 11
        assert rep["rows_repaired"] == rep["classes"]["Web Attack - XSS"] > 0

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "ingest", tmp_path / "none.csv")
        assert code == EXIT_DATA and "no such file" in err


class TestTrainPredict:
    def test_bundles_identical_and_loadable(self, data, capsys, tmp_path):
        code, out1, _ = run(capsys, "train", *data, "--model", tmp_path / "a.bin", "--format", "kv", *FAST)
        assert code == EXIT_OK
        _, out2, _ = run(capsys, "train", *data, "--model", tmp_path / "b.bin", "--format", "kv", *FAST)
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        assert out1 == out2
        assert float(kv(out1)["results.held_out.accuracy"]) >= 0.95
        load_model(tmp_path / "a.bin")

    @pytest.mark.parametrize("kind", ABLATIONS)
    def test_ablation_reports(self, kind, data, capsys, tmp_path):
        code, out, _ = run(capsys, "train", *data, "--model", tmp_path / "m.bin", "--ablation", kind,
                           "--format", "kv", *FAST)
        rep = kv(out)
        assert code == EXIT_OK and rep["results.ablation"] == kind
        for m in ("accuracy", "precision", "recall", "f1"):
            assert 0 <= float(rep[f"results.held_out.{m}"]) <= 1

    def test_predict_matches_library(self, data, capsys, tmp_path):
        run(capsys, "train", *data, "--model", tmp_path / "m.bin", *FAST)
        code, out, _ = run(capsys, "predict", data[1], "--model", tmp_path / "m.bin")
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        model = load_model(tmp_path / "m.bin")
        x, _ = encode_features(read_csv(data[1]), model.schema)
        codes, p = predict_codes(model, x)
        np.testing.assert_array_equal([int(r["predicted_class"]) for r in rows], codes)
        np.testing.assert_array_equal([float(r["attack_probability"]) for r in rows], p)

    def test_predict_empty_input(self, data, capsys, tmp_path):
        run(capsys, "train", *data, "--model", tmp_path / "m.bin", *FAST)
        empty = tmp_path / "empty.csv"
        empty.write_text(data[0].read_text().splitlines()[0] + "\n")
        code, out, _ = run(capsys, "predict", empty, "--model", tmp_path / "m.bin")
        assert code == EXIT_OK
        assert out == "row,predicted_class,predicted_label,attack_probability\n"

    def test_predict_schema_mismatch(self, data, capsys, tmp_path):
        run(capsys, "train", *data, "--model", tmp_path / "m.bin", *FAST)
        bad = tmp_path / "bad.csv"
        bad.write_text(data[0].read_text().replace("Feature 07", "Bogus", 1))
        code, _, err = run(capsys, "predict", bad, "--model", tmp_path / "m.bin")
        assert code != EXIT_OK and "Feature 07" in err

    def test_corrupt_bundle(self, data, capsys, tmp_path):
        (tmp_path / "m.bin").write_bytes(b"TSNIDS\x00\x01junk")
        code, _, err = run(capsys, "predict", data[0], "--model", tmp_path / "m.bin")
        assert code == EXIT_DATA and "bundle" in err


class TestCrossval:
    def test_report_deterministic(self, data, capsys):
        args = ("crossval", *data, "--folds", 3, "--format", "kv", *FAST)
        code, out, _ = run(capsys, *args)
        assert code == EXIT_OK
        rep = kv(out)
        assert rep["results.n_folds"] == "3"
        assert all(rep[f"results.folds.{k}.leakage_ok"] == "True" for k in range(3))
        assert sum(int(rep[f"results.folds.{k}.n_test"]) for k in range(3)) == 400
        assert run(capsys, *args)[1] == out

    def test_config_file_and_precedence(self, data, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"n_trees": 3, "folds": 2, "seed": 8}))
        _, out, _ = run(capsys, "crossval", data[0], "--config", cfg, "--seed", 5, "--format", "kv",
                        "--pretrain-epochs", 1, "--finetune-epochs", 1, "--stage1-hidden", "4",
                        "--stage2-hidden", "4")
        rep = kv(out)
        assert rep["config.n_trees"] == "3" and rep["config.seed"] == "5" and rep["results.n_folds"] == "2"

    def test_usage_errors(self, data, capsys, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["crossval", str(data[0]), "--ablation", "nope"])
        assert exc.value.code == EXIT_USAGE
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"bogus": 1}))
        code, _, err = run(capsys, "crossval", data[0], "--config", cfg)
        assert code == EXIT_USAGE and "bogus" in err
