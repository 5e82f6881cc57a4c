"""Two-stage deep stacked autoencoder + random forest intrusion detection."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    BENIGN,
    ConfusionCounts,
    DatasetSchema,
    FeatureMatrix,
    LabelColumn,
    MetricsReport,
    RandomSource,
    binarize_labels,
    compute_metrics,
)
from .errors import (  # noqa: E402
    BundleError,
    CorruptBundleError,
    IngestError,
    SchemaError,
    TrainingError,
    TsnidsError,
    UnsupportedVersionError,
)
from .forest import ForestConfig, predict_forest, train_forest  # noqa: E402
from .ingest import load_dataset  # noqa: E402
from .neuralnet import TrainConfig  # noqa: E402
from .pipeline import (  # noqa: E402
    ABLATIONS,
    PipelineConfig,
    PipelineModel,
    cross_validate,
    predict,
    run_ablation,
    train_pipeline,
)
from .preprocess import apply_normalizer, fit_normalizer  # noqa: E402
