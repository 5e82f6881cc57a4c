"""Command-line entry point: ``tsnids {ingest,train,crossval,predict,synth}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import load_model, save_model
from .core import RandomSource
from .errors import BundleError, IngestError, SchemaError, TrainingError
from .forest import ForestConfig
from .ingest import IMPUTE_MODES, encode_features, load_dataset, read_csv, repair_labels, write_normalized_csv
from .neuralnet import DECODER_ACTIVATIONS, TrainConfig
from .pipeline import (
    ABLATIONS,
    TARGETS,
    PipelineConfig,
    cross_validate,
    evaluate,
    predict_codes,
    stratified_split,
    train_pipeline,
)
from .preprocess import NORMALIZER_MODES
from .report import render
from .synth import ClassSpec, SynthSpec, generate, split_rows

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAINING = 0, 2, 3, 4

DEFAULTS = {
    "seed": 0,
    "label_column": "Label",
    "benign_class": "BENIGN",
    "normalizer": "standard",
    "impute": "zero",
    "ablation": "two-stage-dsae-rf",
    "target": "binary",
    "stage1_hidden": [64, 32],
    "stage2_hidden": [64, 32],
    "learning_rate": 0.01,
    "pretrain_epochs": 50,
    "finetune_epochs": 50,
    "batch_size": 64,
    "n_trees": 100,
    "max_depth": None,
    "min_samples_split": 2,
    "feature_subset_size": None,
    "append_both": False,
    "forest_input": "encoded",
    "head_only": False,
    "decoder_activation": "auto",
    "dedupe_headers": False,
    "folds": 10,
    "test_fraction": 0.2,
    "format": "text",
}


def _dims(s: str) -> list[int]:
    try:
        dims = [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None
    if not dims or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"hidden sizes must be positive, got {s!r}")
    return dims


def _add_shared(p: argparse.ArgumentParser, training: bool = True) -> None:
    g = p.add_argument_group("shared")
    g.add_argument("--config", type=Path, help="JSON file of option values (flags take precedence)")
    g.add_argument("--seed", type=int)
    g.add_argument("--label-column", dest="label_column")
    g.add_argument("--benign-class", dest="benign_class")
    g.add_argument("--impute", choices=IMPUTE_MODES)
    g.add_argument("--dedupe-headers", dest="dedupe_headers", action="store_const", const=True,
                   help="rename repeated header names (X, X.1, ...) instead of rejecting the file")
    g.add_argument("--format", choices=("text", "kv", "json"))
    if not training:
        return
    t = p.add_argument_group("model")
    t.add_argument("--normalizer", choices=NORMALIZER_MODES)
    t.add_argument("--ablation", choices=ABLATIONS)
    t.add_argument("--target", choices=TARGETS)
    t.add_argument("--stage1-hidden", dest="stage1_hidden", type=_dims, metavar="N,N")
    t.add_argument("--stage2-hidden", dest="stage2_hidden", type=_dims, metavar="N,N")
    t.add_argument("--learning-rate", dest="learning_rate", type=float)
    t.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int)
    t.add_argument("--finetune-epochs", dest="finetune_epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--n-trees", dest="n_trees", type=int)
    t.add_argument("--max-depth", dest="max_depth", type=int)
    t.add_argument("--min-samples-split", dest="min_samples_split", type=int)
    t.add_argument("--feature-subset-size", dest="feature_subset_size", type=int)
    t.add_argument("--append-both", dest="append_both", action="store_const", const=True,
                   help="append both stage-1 class probabilities instead of P(attack) only")
    t.add_argument("--forest-input", dest="forest_input", choices=("encoded", "augmented"))
    t.add_argument("--head-only", dest="head_only", action="store_const", const=True,
                   help="fine-tune only the softmax head")
    t.add_argument("--decoder-activation", dest="decoder_activation", choices=DECODER_ACTIVATIONS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsnids", description=__doc__)
    parser.add_argument("--version", action="version", version=f"tsnids {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="repair, merge and encode CSVs; print the ingest report")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("-o", "--output", type=Path, help="write the normalized CSV here")
    p.add_argument("--report", type=Path)
    _add_shared(p, training=False)

    p = sub.add_parser("train", help="train on a stratified split, save the bundle, report held-out metrics")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--report", type=Path)
    _add_shared(p)

    p = sub.add_parser("crossval", help="stratified k-fold evaluation")
    p.add_argument("paths", nargs="+", type=Path)
    p.add_argument("--folds", type=int)
    p.add_argument("--all-ablations", action="store_true", help="run every ablation in turn")
    p.add_argument("--report", type=Path)
    _add_shared(p)

    p = sub.add_parser("predict", help="per-row class and stage-1 attack probability")
    p.add_argument("input", type=Path)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("-o", "--output", type=Path, help="CSV destination (default: stdout)")
    _add_shared(p, training=False)

    p = sub.add_parser("synth", help="write a seeded synthetic CICIDS-shaped CSV")
    p.add_argument("-o", "--output", type=Path, required=True,
                   help="file name; with --parts N, files are named <stem>_<i><suffix>")
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--features", type=int, default=80)
    p.add_argument("--classes", default="BENIGN:1,DDoS:1", help="name:weight,... (default %(default)s)")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--inf-cells", type=int, default=0)
    p.add_argument("--nan-cells", type=int, default=0)
    p.add_argument("--mojibake", action="store_true")
    p.add_argument("--header-whitespace", action="store_true")
    p.add_argument("--categorical", action="store_true", help="add a string-valued Protocol column")
    p.add_argument("--parts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-column", dest="label_column", default="Label")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """defaults < config file < flags."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"cannot read config {args.config}: {exc}") from None
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown keys in {args.config}: {sorted(unknown)}")
        opts.update(loaded)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    return opts


def pipeline_config(opts: dict) -> PipelineConfig:
    return PipelineConfig(
        stage1_hidden=tuple(opts["stage1_hidden"]),
        stage2_hidden=tuple(opts["stage2_hidden"]),
        pretrain=TrainConfig(opts["learning_rate"], opts["pretrain_epochs"], opts["batch_size"]),
        finetune=TrainConfig(opts["learning_rate"], opts["finetune_epochs"], opts["batch_size"]),
        forest=ForestConfig(opts["n_trees"], opts["max_depth"], opts["min_samples_split"],
                            opts["feature_subset_size"]),
        normalizer=opts["normalizer"],
        decoder_activation=opts["decoder_activation"],
        ablation=opts["ablation"],
        target=opts["target"],
        append_both_probabilities=bool(opts["append_both"]),
        forest_input=opts["forest_input"],
        head_only=bool(opts["head_only"]),
        seed=opts["seed"],
    )


def _load(args, opts):
    return load_dataset(args.paths, opts["label_column"], opts["benign_class"], opts["impute"],
                        bool(opts["dedupe_headers"]))


def _emit(text: str, path: Path | None) -> None:
    sys.stdout.write(text)
    if path is not None:
        Path(path).write_text(text)


def cmd_ingest(args) -> int:
    opts = resolve(args)
    ds = _load(args, opts)
    if args.output:
        write_normalized_csv(args.output, ds)
    _emit(render("ingest", ds.report.as_dict(), opts, opts["format"]), args.report)
    return EXIT_OK


def cmd_train(args) -> int:
    opts = resolve(args)
    cfg = pipeline_config(opts)
    ds = _load(args, opts)
    train, test = stratified_split(ds.labels.binary, opts["test_fraction"], RandomSource(cfg.seed).child(1))
    model = train_pipeline(ds.features.take(train), ds.labels.take(train), cfg, ds.schema)
    save_model(model, args.model)
    metrics = evaluate(model, ds.features.take(test), ds.labels.take(test))
    results = {"ablation": cfg.ablation, "n_train": int(train.size), "n_test": int(test.size),
               "held_out": metrics.as_dict(), "ingest": ds.report.as_dict()}
    snapshot = dict(opts, resolved_pipeline=cfg.to_dict())
    _emit(render("train", results, snapshot, opts["format"]), args.report)
    return EXIT_OK


def cmd_crossval(args) -> int:
    opts = resolve(args)
    cfg = pipeline_config(opts)
    ds = _load(args, opts)
    kinds = ABLATIONS if args.all_ablations else (cfg.ablation,)
    results = {}
    for kind in kinds:
        rep = cross_validate(ds.features, ds.labels, cfg, kind, opts["folds"])
        d = rep.as_dict()
        d.pop("config")
        d.pop("version")
        results[kind] = d
    snapshot = dict(opts, resolved_pipeline=cfg.to_dict())
    if not args.all_ablations:
        results = results[cfg.ablation]
    _emit(render("crossval", results, snapshot, opts["format"]), args.report)
    return EXIT_OK


def cmd_predict(args) -> int:
    opts = resolve(args)
    model = load_model(args.model)
    table = read_csv(args.input, bool(opts["dedupe_headers"]))
    if model.schema.label_name in table.header:
        table = repair_labels(table, model.schema.label_name)
    x, _ = encode_features(table, model.schema, opts["impute"])
    codes, p_attack = predict_codes(model, x)
    multiclass = model.config.target == "multiclass" and model.config.ablation not in ("dsae-only", "sae-softmax")
    names = list(model.classes) if multiclass else [model.benign_class, "ATTACK"]
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["row", "predicted_class", "predicted_label", "attack_probability"])
        for i, (c, p) in enumerate(zip(codes, p_attack)):
            w.writerow([i, int(c), names[int(c)], "" if np.isnan(p) else repr(float(p))])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _parse_classes(s: str) -> tuple[ClassSpec, ...]:
    out = []
    for part in s.split(","):
        name, _, weight = part.partition(":")
        out.append(ClassSpec(name.strip(), float(weight) if weight else 1.0))
    return tuple(out)


def cmd_synth(args) -> int:
    spec = SynthSpec(
        n_rows=args.rows, n_features=args.features, classes=_parse_classes(args.classes),
        noise=args.noise, seed=args.seed, inf_cells=args.inf_cells, nan_cells=args.nan_cells,
        mojibake=args.mojibake, header_whitespace=args.header_whitespace,
        categorical_column=args.categorical, label_name=args.label_column,
    )
    result = generate(spec)
    if args.parts <= 1:
        result.write(args.output)
        written = [str(args.output)]
    else:
        out = Path(args.output)
        written = []
        for i, data in enumerate(split_rows(result, args.parts)):
            p = out.with_name(f"{out.stem}_{i}{out.suffix}")
            p.write_bytes(data)
            written.append(str(p))
    snapshot = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items()}
    sys.stdout.write(render("synth", {"files": written, **result.defects}, snapshot))
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "crossval": cmd_crossval,
            "predict": cmd_predict, "synth": cmd_synth}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (IngestError, SchemaError, BundleError) as exc:
        print(f"tsnids {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as exc:
        print(f"tsnids {args.command}: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ValueError as exc:
        print(f"tsnids {args.command}: invalid option: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
