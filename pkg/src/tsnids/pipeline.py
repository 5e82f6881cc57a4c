"""Two-stage detector: stacked autoencoder + softmax, then probability-augmented
stacked autoencoder + random forest; cross-validation and ablations."""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .core import (
    ConfusionCounts,
    DatasetSchema,
    LabelColumn,
    MetricsReport,
    RandomSource,
    compute_metrics,
)
from .errors import SchemaError, TrainingError
from .forest import ForestConfig, ForestModel, predict_forest, train_forest
from .neuralnet import (
    SoftmaxHead,
    StackedAutoencoderModel,
    TrainConfig,
    encode,
    finetune_supervised,
    init_head,
    init_stack,
    predict_proba,
    reconstruction_error,
    stack_pretrain,
)
from .preprocess import NormalizerModel, apply_normalizer, fit_normalizer

ABLATIONS = ("dsae-only", "sae-softmax", "sae-rf", "two-stage-softmax", "two-stage-dsae-rf")
FULL_MODEL = "two-stage-dsae-rf"
TARGETS = ("binary", "multiclass")

# Child-stream keys under the run seed.
_S1_INIT, _S1_PRETRAIN, _S1_FINETUNE = 1, 2, 3
_S2_INIT, _S2_PRETRAIN, _S2_FINETUNE, _S2_HEAD, _FOREST, _S1_HEAD = 4, 5, 6, 7, 8, 9
_SPLIT, _FOLD = 100, 200


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to train one model. Seeds inside ``pretrain``,
    ``finetune`` and ``forest`` are ignored: each component's seed is derived
    from ``seed``."""

    stage1_hidden: tuple[int, ...] = (64, 32)
    stage2_hidden: tuple[int, ...] = (64, 32)
    pretrain: TrainConfig = TrainConfig(epochs=50)
    finetune: TrainConfig = TrainConfig(epochs=50)
    forest: ForestConfig = ForestConfig()
    normalizer: str = "standard"
    decoder_activation: str = "auto"
    ablation: str = FULL_MODEL
    target: str = "binary"
    append_both_probabilities: bool = False
    forest_input: str = "encoded"  # or "augmented": skip the stage-2 encoder
    head_only: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stage1_hidden", tuple(int(h) for h in self.stage1_hidden))
        object.__setattr__(self, "stage2_hidden", tuple(int(h) for h in self.stage2_hidden))
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.forest_input not in ("encoded", "augmented"):
            raise ValueError(f"forest_input must be 'encoded' or 'augmented', got {self.forest_input!r}")
        if not self.stage1_hidden or not self.stage2_hidden:
            raise ValueError("each stage needs at least one hidden layer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stage1_hidden"] = list(self.stage1_hidden)
        d["stage2_hidden"] = list(self.stage2_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        for key, typ in (("pretrain", TrainConfig), ("finetune", TrainConfig), ("forest", ForestConfig)):
            if isinstance(d.get(key), dict):
                d[key] = typ(**d[key])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class StageOneModel:
    normalizer: NormalizerModel
    dsae: StackedAutoencoderModel
    head: SoftmaxHead | None  # absent for the dsae-only ablation


@dataclass
class StageTwoModel:
    dsae: StackedAutoencoderModel | None  # absent for sae-rf / augmented forest input
    forest: ForestModel | None = None
    head: SoftmaxHead | None = None


@dataclass
class PipelineModel:
    schema: DatasetSchema
    classes: tuple[str, ...]
    benign_class: str
    config: PipelineConfig
    stage1: StageOneModel
    stage2: StageTwoModel | None = None
    anomaly_threshold: float | None = None
    version: str = __version__

    @property
    def benign_code(self) -> int:
        return self.classes.index(self.benign_class)

    @property
    def n_appended(self) -> int:
        return 2 if self.config.append_both_probabilities else 1


def _matrix(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def _seeded(cfg: TrainConfig, root: RandomSource, key: int) -> TrainConfig:
    return replace(cfg, seed=root.child_seed(key))


def augment(x_norm: np.ndarray, proba: np.ndarray, both: bool = False) -> np.ndarray:
    """Append the stage-1 attack probability (or both class probabilities)."""
    extra = proba if both else proba[:, 1:2]
    return np.hstack([x_norm, extra])


def _stage_two_input(model: PipelineModel, x_norm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s1 = model.stage1
    proba = predict_proba(s1.dsae, s1.head, x_norm)
    return augment(x_norm, proba, model.config.append_both_probabilities), proba


def _targets(labels: LabelColumn, cfg: PipelineConfig) -> tuple[np.ndarray, int]:
    if cfg.target == "multiclass":
        return labels.raw, len(labels.classes)
    return labels.binary, 2


def _best_f1_threshold(scores: np.ndarray, binary: np.ndarray) -> float:
    """Threshold t maximizing training F1 for the rule ``score >= t`` -> attack."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = binary[order].astype(np.int64)
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    pos = y.sum()
    last = np.r_[s[1:] < s[:-1], True]  # only cut between distinct scores
    f1 = np.where(tp > 0, 2 * tp / (tp + fp + pos), 0.0)
    f1 = np.where(last, f1, -1.0)
    return float(s[int(np.argmax(f1))]) if s.size else 0.0


def train_stage_one(x_norm: np.ndarray, labels: LabelColumn, cfg: PipelineConfig, normalizer, root: RandomSource) -> StageOneModel:
    stack = init_stack(x_norm.shape[1], cfg.stage1_hidden, root.child(_S1_INIT), scale=cfg.pretrain.init_scale)
    try:
        stack, _ = stack_pretrain(stack, x_norm, _seeded(cfg.pretrain, root, _S1_PRETRAIN),
                                  decoder_activation=cfg.decoder_activation)
        head = init_head(stack.output_dim, 2, root.child(_S1_HEAD), scale=cfg.finetune.init_scale)
        stack, head, _ = finetune_supervised(stack, head, x_norm, labels.binary,
                                             _seeded(cfg.finetune, root, _S1_FINETUNE), cfg.head_only)
    except TrainingError as exc:
        raise TrainingError(f"stage 1: {exc}") from None
    return StageOneModel(normalizer, stack, head)


def train_stage_two(model: PipelineModel, x_norm: np.ndarray, labels: LabelColumn, seed: int | None = None) -> StageTwoModel:
    """Fit stage 2 on top of ``model.stage1``, which stays frozen.

    ``seed`` overrides the run seed for stage-2 components only.
    """
    cfg = model.config
    root = RandomSource(cfg.seed if seed is None else seed)
    y, n_classes = _targets(labels, cfg)
    kind = cfg.ablation
    try:
        if kind == "sae-rf":
            feats = encode(model.stage1.dsae, x_norm)
            forest = train_forest(feats, y, replace(cfg.forest, seed=root.child_seed(_FOREST)), n_classes)
            return StageTwoModel(None, forest)
        aug, _ = _stage_two_input(model, x_norm)
        if kind == FULL_MODEL and cfg.forest_input == "augmented":
            forest = train_forest(aug, y, replace(cfg.forest, seed=root.child_seed(_FOREST)), n_classes)
            return StageTwoModel(None, forest)
        stack = init_stack(aug.shape[1], cfg.stage2_hidden, root.child(_S2_INIT), scale=cfg.pretrain.init_scale)
        stack, _ = stack_pretrain(stack, aug, _seeded(cfg.pretrain, root, _S2_PRETRAIN),
                                  decoder_activation=cfg.decoder_activation)
        if kind == "two-stage-softmax":
            head = init_head(stack.output_dim, n_classes, root.child(_S2_HEAD), scale=cfg.finetune.init_scale)
            stack, head, _ = finetune_supervised(stack, head, aug, y,
                                                 _seeded(cfg.finetune, root, _S2_FINETUNE), cfg.head_only)
            return StageTwoModel(stack, head=head)
        forest = train_forest(encode(stack, aug), y, replace(cfg.forest, seed=root.child_seed(_FOREST)), n_classes)
        return StageTwoModel(stack, forest)
    except TrainingError as exc:
        raise TrainingError(f"stage 2: {exc}") from None


def train_pipeline(
    x,
    labels: LabelColumn,
    cfg: PipelineConfig = PipelineConfig(),
    schema: DatasetSchema | None = None,
    stage1: StageOneModel | None = None,
) -> PipelineModel:
    """Fit the configured model on ``x``.

    Passing a trained ``stage1`` freezes it and only (re)fits stage 2.
    """
    if schema is None:
        schema = getattr(x, "schema", None)
    x = _matrix(x)
    if schema is None:
        schema = DatasetSchema(tuple(f"f{j}" for j in range(x.shape[1])))
    if x.shape[0] != len(labels):
        raise SchemaError(f"{x.shape[0]} rows but {len(labels)} labels")
    if len(np.unique(labels.binary)) < 2:
        raise TrainingError("training data must contain both benign and attack rows")
    if schema.n_features != x.shape[1]:
        raise SchemaError(f"schema lists {schema.n_features} features, matrix has {x.shape[1]}")
    root = RandomSource(cfg.seed)

    if stage1 is None:
        normalizer = fit_normalizer(x, cfg.normalizer)
        x_norm = apply_normalizer(normalizer, x)
    else:
        normalizer = stage1.normalizer
        x_norm = apply_normalizer(normalizer, x)

    model = PipelineModel(schema, labels.classes, labels.benign_class, cfg, stage1)

    if cfg.ablation == "dsae-only":
        benign = labels.binary == 0
        stack = init_stack(x.shape[1], cfg.stage1_hidden, root.child(_S1_INIT), scale=cfg.pretrain.init_scale)
        try:
            stack, _ = stack_pretrain(stack, x_norm[benign], _seeded(cfg.pretrain, root, _S1_PRETRAIN),
                                      decoder_activation=cfg.decoder_activation)
        except TrainingError as exc:
            raise TrainingError(f"stage 1: {exc}") from None
        model.stage1 = StageOneModel(normalizer, stack, None)
        model.anomaly_threshold = _best_f1_threshold(reconstruction_error(stack, x_norm), labels.binary)
        return model

    if stage1 is None:
        model.stage1 = train_stage_one(x_norm, labels, cfg, normalizer, root)
    if cfg.ablation != "sae-softmax":
        model.stage2 = train_stage_two(model, x_norm, labels)
    return model


def predict_codes(model: PipelineModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Per-row class code (binary or raw, per the model target) and the
    stage-1 attack probability (NaN for the dsae-only ablation)."""
    x = _matrix(x)
    n = x.shape[0]
    if x.ndim != 2 or x.shape[1] != model.schema.n_features:
        raise SchemaError(f"model expects {model.schema.n_features} features, got shape {x.shape}")
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    s1 = model.stage1
    x_norm = apply_normalizer(s1.normalizer, x)
    kind = model.config.ablation
    if kind == "dsae-only":
        score = reconstruction_error(s1.dsae, x_norm)
        return (score >= model.anomaly_threshold).astype(np.int64), np.full(n, np.nan)
    proba = predict_proba(s1.dsae, s1.head, x_norm)
    p_attack = proba[:, 1].copy()
    if kind == "sae-softmax":
        return np.argmax(proba, axis=1), p_attack
    s2 = model.stage2
    if kind == "sae-rf":
        return predict_forest(s2.forest, encode(s1.dsae, x_norm)), p_attack
    aug = augment(x_norm, proba, model.config.append_both_probabilities)
    if s2.head is not None:
        return np.argmax(predict_proba(s2.dsae, s2.head, aug), axis=1), p_attack
    feats = aug if s2.dsae is None else encode(s2.dsae, aug)
    return predict_forest(s2.forest, feats), p_attack


def predict(model: PipelineModel, x) -> tuple[np.ndarray, np.ndarray]:
    return predict_codes(model, x)


def to_binary(model: PipelineModel, codes: np.ndarray) -> np.ndarray:
    """Collapse predictions to benign(0)/attack(1)."""
    uses_raw = model.config.target == "multiclass" and model.config.ablation in (
        "sae-rf", "two-stage-softmax", FULL_MODEL)
    if uses_raw:
        return (codes != model.benign_code).astype(np.int64)
    return codes.astype(np.int64)


def evaluate(model: PipelineModel, x, labels: LabelColumn) -> MetricsReport:
    codes, _ = predict_codes(model, x)
    return compute_metrics(ConfusionCounts.from_predictions(labels.binary, to_binary(model, codes)))


# -- splitting ---------------------------------------------------------------


def stratified_folds(binary: np.ndarray, n_folds: int, rng: RandomSource) -> np.ndarray:
    """Fold id per row. Rows of each class are shuffled and dealt round-robin,
    classes one after another, so every fold holds each class's share to
    within one row."""
    binary = np.asarray(binary)
    classes, counts = np.unique(binary, return_counts=True)
    if n_folds < 2:
        raise ValueError("need at least two folds")
    if counts.min() < n_folds:
        raise TrainingError(
            f"stratified {n_folds}-fold split needs >= {n_folds} rows per class, "
            f"got {dict(zip(classes.tolist(), counts.tolist()))}"
        )
    gen = rng.generator
    folds = np.empty(binary.shape[0], dtype=np.int64)
    pos = 0
    for c in classes:
        idx = gen.permutation(np.flatnonzero(binary == c))
        folds[idx] = (pos + np.arange(idx.size)) % n_folds
        pos += idx.size
    return folds


def stratified_split(binary: np.ndarray, test_fraction: float, rng: RandomSource) -> tuple[np.ndarray, np.ndarray]:
    """Train/test row indices with each class split in the same proportion."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    gen = rng.generator
    train, test = [], []
    for c in np.unique(binary):
        idx = gen.permutation(np.flatnonzero(binary == c))
        k = max(1, int(round(test_fraction * idx.size))) if idx.size > 1 else 0
        test.append(idx[:k])
        train.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


# -- cross-validation -----------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    metrics: MetricsReport
    leakage_ok: bool


@dataclass
class CrossValReport:
    ablation: str
    folds: list[FoldResult]
    mean: dict[str, float]
    std: dict[str, float]
    fold_digest: str
    fold_assignment: np.ndarray = field(repr=False)
    config: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def summary(self) -> MetricsReport:
        return MetricsReport(self.mean["accuracy"], self.mean["precision"],
                             self.mean["recall"], self.mean["f1"],
                             folds=tuple(f.metrics for f in self.folds))

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "ablation": self.ablation,
            "n_folds": len(self.folds),
            "fold_digest": self.fold_digest,
            "mean": dict(self.mean),
            "std": dict(self.std),
            "folds": [
                {"fold": f.fold, "n_train": f.n_train, "n_test": f.n_test,
                 "leakage_ok": f.leakage_ok, **f.metrics.as_dict()}
                for f in self.folds
            ],
            "config": self.config,
        }


def leakage_ok(model: PipelineModel, x_train: np.ndarray) -> bool:
    """True when the stored normalizer extrema are exactly the training extrema."""
    norm = model.stage1.normalizer
    return bool(np.array_equal(norm.col_min, x_train.min(axis=0))
                and np.array_equal(norm.col_max, x_train.max(axis=0)))


def cross_validate(
    x,
    labels: LabelColumn,
    cfg: PipelineConfig = PipelineConfig(),
    ablation: str | None = None,
    n_folds: int = 10,
    schema: DatasetSchema | None = None,
) -> CrossValReport:
    """Stratified k-fold evaluation: each fold fits the whole model, normalizer
    included, on the other k-1 folds only."""
    if schema is None:
        schema = getattr(x, "schema", None)
    x = _matrix(x)
    if ablation is not None:
        cfg = replace(cfg, ablation=ablation)
    root = RandomSource(cfg.seed)
    folds = stratified_folds(labels.binary, n_folds, root.child(_SPLIT))
    results = []
    for k in range(n_folds):
        test = folds == k
        train = ~test
        fold_cfg = replace(cfg, seed=root.child_seed(_FOLD, k))
        model = train_pipeline(x[train], labels.take(train), fold_cfg, schema)
        ok = leakage_ok(model, x[train])
        if not ok:
            raise AssertionError(f"fold {k}: normalizer saw rows outside the training split")
        metrics = evaluate(model, x[test], labels.take(test))
        results.append(FoldResult(k, int(train.sum()), int(test.sum()), metrics, ok))
    names = ("accuracy", "precision", "recall", "f1")
    table = np.array([[getattr(r.metrics, m) for m in names] for r in results])
    digest = hashlib.sha256(folds.astype("<i8").tobytes()).hexdigest()
    return CrossValReport(
        cfg.ablation,
        results,
        dict(zip(names, map(float, table.mean(axis=0)))),
        dict(zip(names, map(float, table.std(axis=0)))),
        digest,
        folds,
        cfg.to_dict(),
    )


def run_ablation(x, labels: LabelColumn, cfg: PipelineConfig, kind: str, n_folds: int = 10) -> MetricsReport:
    """Mean cross-validated metrics for one ablation, with per-fold detail."""
    return cross_validate(x, labels, cfg, kind, n_folds).summary


def run_all_ablations(x, labels: LabelColumn, cfg: PipelineConfig = PipelineConfig(), n_folds: int = 10) -> dict[str, CrossValReport]:
    return {kind: cross_validate(x, labels, cfg, kind, n_folds) for kind in ABLATIONS}
